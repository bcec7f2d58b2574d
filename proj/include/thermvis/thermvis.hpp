#pragma once

#include "thermvis/checkpoint.hpp"
#include "thermvis/config.hpp"
#include "thermvis/crop.hpp"
#include "thermvis/discriminator.hpp"
#include "thermvis/error.hpp"
#include "thermvis/evaluation.hpp"
#include "thermvis/generator.hpp"
#include "thermvis/image.hpp"
#include "thermvis/layers.hpp"
#include "thermvis/losses.hpp"
#include "thermvis/manifest.hpp"
#include "thermvis/optim.hpp"
#include "thermvis/pipeline.hpp"
#include "thermvis/plot.hpp"
#include "thermvis/png_io.hpp"
#include "thermvis/replay_buffer.hpp"
#include "thermvis/roi.hpp"
#include "thermvis/run_config.hpp"
#include "thermvis/synth.hpp"
#include "thermvis/tensor.hpp"
#include "thermvis/trainer.hpp"
