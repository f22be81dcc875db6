#pragma once

// Umbrella header: the full toolkit for entire solutions of the Lagrangian
// mean curvature equation in supercritical phase.

#include "lml/barrier.hpp"
#include "lml/config.hpp"
#include "lml/envelope.hpp"
#include "lml/errors.hpp"
#include "lml/grid3d.hpp"
#include "lml/implicit.hpp"
#include "lml/interp.hpp"
#include "lml/io.hpp"
#include "lml/linalg.hpp"
#include "lml/newton_fd.hpp"
#include "lml/ode.hpp"
#include "lml/phase.hpp"
#include "lml/profile.hpp"
#include "lml/radial.hpp"
#include "lml/regression.hpp"
#include "lml/rng.hpp"
#include "lml/runner.hpp"
#include "lml/version.hpp"
