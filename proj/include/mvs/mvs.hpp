#pragma once

#include "mvs/core.hpp"
#include "mvs/selection.hpp"
#include "mvs/combiner.hpp"
#include "mvs/whc.hpp"
#include "mvs/fusion.hpp"
#include "mvs/loss.hpp"
#include "mvs/adam.hpp"
#include "mvs/config.hpp"
#include "mvs/retrieval.hpp"
#include "mvs/training.hpp"
#include "mvs/tensor_io.hpp"
#include "mvs/model_pack.hpp"
#include "mvs/manifest.hpp"
#include "mvs/synth.hpp"
#include "mvs/gradcheck.hpp"
#include "mvs/inspect.hpp"
