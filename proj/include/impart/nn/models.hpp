#pragma once

#include <string>
#include <vector>

#include "impart/nn/network.hpp"

namespace impart::nn {

// Registered architectures:
//   victim_resnet     six 3x3 convolutions with two residual blocks
//   surrogate_narrow  plain conv/max-pool stack, 16-32-64 channels
//   surrogate_wide    plain conv/max-pool stack, 32-64-128 channels, extra conv
// Every model starts with a Standardize layer and ends with a Linear head whose
// input is the latent (penultimate) representation.
Network build_model(const std::string& model_id, int num_classes, int channels = 3,
                    int height = 32, int width = 32);

std::vector<std::string> registered_models();

bool is_registered_model(const std::string& model_id);

}  // namespace impart::nn
