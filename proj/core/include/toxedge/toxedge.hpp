#pragma once

#include "toxedge/audio.hpp"
#include "toxedge/bench.hpp"
#include "toxedge/checkpoint.hpp"
#include "toxedge/compress.hpp"
#include "toxedge/config.hpp"
#include "toxedge/ctc.hpp"
#include "toxedge/error.hpp"
#include "toxedge/kernels.hpp"
#include "toxedge/losses.hpp"
#include "toxedge/memory.hpp"
#include "toxedge/metrics.hpp"
#include "toxedge/model.hpp"
#include "toxedge/rng.hpp"
#include "toxedge/tensor.hpp"
#include "toxedge/train.hpp"
#include "toxedge/version.hpp"
