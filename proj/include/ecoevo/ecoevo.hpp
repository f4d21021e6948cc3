#pragma once

#include "ecoevo/analytic.hpp"
#include "ecoevo/dimorphic.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/experiments.hpp"
#include "ecoevo/fleming_viot.hpp"
#include "ecoevo/ibm.hpp"
#include "ecoevo/ibm_io.hpp"
#include "ecoevo/model.hpp"
#include "ecoevo/rng.hpp"
#include "ecoevo/sfvp.hpp"
#include "ecoevo/stats.hpp"
#include "ecoevo/tss.hpp"
#include "ecoevo/wright_fisher.hpp"
