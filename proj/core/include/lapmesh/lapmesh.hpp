#pragma once

#include "lapmesh/controls.hpp"
#include "lapmesh/error.hpp"
#include "lapmesh/io.hpp"
#include "lapmesh/linear_solver.hpp"
#include "lapmesh/log.hpp"
#include "lapmesh/mesh.hpp"
#include "lapmesh/pipeline.hpp"
#include "lapmesh/projection.hpp"
#include "lapmesh/refine.hpp"
#include "lapmesh/regularizer.hpp"
#include "lapmesh/robust.hpp"
#include "lapmesh/synth.hpp"
