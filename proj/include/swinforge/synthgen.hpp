#pragma once

// Procedural two-class image generator used for tests and desk-scale runs.
// "REAL" images imitate camera captures (smooth correlated fields, sensor
// noise, muted colors); "FAKE" images imitate rendered graphics (flat-shaded
// shapes, saturated palette, clean gradients, channel banding). The classes
// differ in texture and chroma statistics, so a small classifier can learn
// them from a few thousand samples.

#include <cstdint>
#include <string>

#include "swinforge/colorframe.hpp"

namespace swinforge {

RgbImage synth_real_image(uint64_t seed, int size = 32);
RgbImage synth_fake_image(uint64_t seed, int size = 32);

// Writes a CIFAKE-layout folder:
//   <root>/train/{FAKE,REAL}/<class>_<index>.png   (train_per_class each)
//   <root>/test/{FAKE,REAL}/<class>_<index>.png    (test_per_class each)
void synth_dataset_cifake(const std::string& root, int train_per_class, int test_per_class,
                          uint64_t seed, int size = 32);

// Writes a flat two-folder layout: <root>/{FAKE,REAL}/<class>_<index>.png
void synth_dataset_flat(const std::string& root, int per_class, uint64_t seed, int size = 32);

}  // namespace swinforge
