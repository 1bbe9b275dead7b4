#pragma once

#include "nowcast/autograd.hpp"
#include "nowcast/checkpoint.hpp"
#include "nowcast/container_io.hpp"
#include "nowcast/dataset_pipeline.hpp"
#include "nowcast/discriminator.hpp"
#include "nowcast/explainability.hpp"
#include "nowcast/generator.hpp"
#include "nowcast/image_io.hpp"
#include "nowcast/losses.hpp"
#include "nowcast/mask_generation.hpp"
#include "nowcast/ops.hpp"
#include "nowcast/optim.hpp"
#include "nowcast/run_config.hpp"
#include "nowcast/synthetic_storms.hpp"
#include "nowcast/training.hpp"
#include "nowcast/uncertainty.hpp"
#include "nowcast/verification.hpp"
