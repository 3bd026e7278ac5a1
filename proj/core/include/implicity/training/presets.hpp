// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "implicity/extraction/extract.hpp"
#include "implicity/model/occupancy_model.hpp"
#include "implicity/training/dataset.hpp"
#include "implicity/training/trainer.hpp"

namespace implicity {

/// Single-machine settings used by the acceptance experiment: full plane sizes and
/// d = 32, one convolution per U-Net level with channels capped at d.
ModelConfig desk_model(Variant v);
/// Training schedule matching desk_model on the 256 m town.
TrainConfig desk_training();
/// Validation extraction: non-overlapping windows.
ExtractionConfig validation_extraction();

/// The `demo` pipeline: 128 m scene, small network, short schedule.
SceneBundleConfig demo_scene();
ModelConfig demo_model();
TrainConfig demo_training();

}  // namespace implicity
