// Umbrella header: the full mesh-refitting and field-transfer toolkit.
#pragma once

#include "meshfit/config.hpp"
#include "meshfit/demo.hpp"
#include "meshfit/distortion.hpp"
#include "meshfit/geometry.hpp"
#include "meshfit/io.hpp"
#include "meshfit/mesh.hpp"
#include "meshfit/sliding.hpp"
#include "meshfit/solver.hpp"
#include "meshfit/transfer.hpp"
