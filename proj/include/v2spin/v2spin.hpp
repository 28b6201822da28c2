#pragma once

// Umbrella header.

#include "v2spin/errors.hpp"
#include "v2spin/spin_core.hpp"
#include "v2spin/transitions.hpp"
#include "v2spin/enhancement.hpp"
#include "v2spin/polarization.hpp"
#include "v2spin/spectra.hpp"
#include "v2spin/estimation.hpp"
#include "v2spin/shells.hpp"
#include "v2spin/io.hpp"
