// SPDX-License-Identifier: Apache-2.0
#include "implicity/training/presets.hpp"

namespace implicity {

ModelConfig desk_model(Variant v) {
  ModelConfig m;
  m.variant = v;
  m.unet_convs = 1;
  m.unet_channel_cap = 1;
  return m;
}

TrainConfig desk_training() {
  TrainConfig t;
  t.accumulation = 2;
  t.base_lr = 2e-4;
  t.cycle_amplitude = 1e-3;
  t.cycle_length = 500;
  t.max_steps = 1000;
  t.eval_every = 250;
  t.patience = 3;
  return t;
}

ExtractionConfig validation_extraction() {
  ExtractionConfig e;
  e.stride = e.window;
  return e;
}

SceneBundleConfig demo_scene() {
  SceneBundleConfig s;
  s.scene.width = 128.0;
  s.scene.height = 128.0;
  s.scene.forest_regions = 1;
  return s;
}

ModelConfig demo_model() {
  ModelConfig m = desk_model(Variant::Stereo);
  m.d = 16;
  return m;
}

TrainConfig demo_training() {
  TrainConfig t;
  t.accumulation = 1;
  t.base_lr = 1e-3;
  t.cycle_amplitude = 0.0;
  t.max_steps = 200;
  t.eval_every = 50;
  t.patience = 5;
  t.queries_per_patch = 1024;
  return t;
}

}  // namespace implicity
