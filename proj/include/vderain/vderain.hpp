#pragma once

// Everything except the command implementations (vderain/commands.hpp).

#include "vderain/checkpoint.hpp"
#include "vderain/config.hpp"
#include "vderain/dataset.hpp"
#include "vderain/desk.hpp"
#include "vderain/error.hpp"
#include "vderain/frames_io.hpp"
#include "vderain/inference.hpp"
#include "vderain/metrics.hpp"
#include "vderain/networks.hpp"
#include "vderain/optim.hpp"
#include "vderain/priors.hpp"
#include "vderain/synthesis.hpp"
#include "vderain/tensor.hpp"
#include "vderain/tensor_io.hpp"
#include "vderain/training.hpp"
#include "vderain/video.hpp"
