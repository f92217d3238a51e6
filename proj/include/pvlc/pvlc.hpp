#ifndef PVLC_PVLC_HPP
#define PVLC_PVLC_HPP

#include "calibration.hpp"
#include "compensation.hpp"
#include "constants.hpp"
#include "device_model.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "link_sim.hpp"
#include "presets.hpp"
#include "rng.hpp"

#endif
