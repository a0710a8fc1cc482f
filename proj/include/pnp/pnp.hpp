#pragma once

#include "pnp/vec.hpp"
#include "pnp/rng.hpp"
#include "pnp/sparse_operator.hpp"
#include "pnp/partition.hpp"
#include "pnp/phantom.hpp"
#include "pnp/radon.hpp"
#include "pnp/observe.hpp"
#include "pnp/image_io.hpp"
#include "pnp/fidelity.hpp"
#include "pnp/denoiser.hpp"
#include "pnp/prox.hpp"
#include "pnp/schedule.hpp"
#include "pnp/solver_state.hpp"
#include "pnp/solvers.hpp"
#include "pnp/diagnostics.hpp"
#include "pnp/config.hpp"
#include "pnp/experiment.hpp"
