#include "impart/nn/models.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace impart::nn {
namespace {

int conv_bn_relu(Network& net, int from, int cin, int cout, int stride) {
  const int conv = net.add(std::make_unique<Conv2d>(cin, cout, 3, stride), {from});
  const int bn = net.add(std::make_unique<BatchNorm2d>(cout), {conv});
  return net.add(std::make_unique<Relu>(), {bn});
}

int residual_block(Network& net, int from, int channels) {
  const int a = conv_bn_relu(net, from, channels, channels, 1);
  const int conv = net.add(std::make_unique<Conv2d>(channels, channels, 3, 1), {a});
  const int bn = net.add(std::make_unique<BatchNorm2d>(channels), {conv});
  const int sum = net.add(std::make_unique<Add>(), {bn, from});
  return net.add(std::make_unique<Relu>(), {sum});
}

void add_head(Network& net, int from, int features, int num_classes) {
  const int pooled = net.add(std::make_unique<GlobalAvgPool>(), {from});
  net.set_latent(pooled);
  net.add(std::make_unique<Linear>(features, num_classes), {pooled});
}

Network victim_resnet(int num_classes, int c, int h, int w) {
  Network net("victim_resnet", c, h, w);
  int x = net.add(std::make_unique<Standardize>(c), {Network::kInput});
  x = conv_bn_relu(net, x, c, 16, 2);
  x = residual_block(net, x, 16);
  x = conv_bn_relu(net, x, 16, 32, 2);
  x = residual_block(net, x, 32);
  add_head(net, x, 32, num_classes);
  return net;
}

Network plain_stack(const std::string& id, int num_classes, int c, int h, int w,
                    std::vector<int> widths, bool extra_conv) {
  Network net(id, c, h, w);
  int x = net.add(std::make_unique<Standardize>(c), {Network::kInput});
  int cin = c;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    x = conv_bn_relu(net, x, cin, widths[i], 1);
    if (extra_conv && i + 1 == widths.size()) x = conv_bn_relu(net, x, widths[i], widths[i], 1);
    if (i + 1 < widths.size()) x = net.add(std::make_unique<MaxPool2>(), {x});
    cin = widths[i];
  }
  add_head(net, x, cin, num_classes);
  return net;
}

}  // namespace

std::vector<std::string> registered_models() {
  return {"victim_resnet", "surrogate_narrow", "surrogate_wide"};
}

bool is_registered_model(const std::string& model_id) {
  const auto ids = registered_models();
  return std::find(ids.begin(), ids.end(), model_id) != ids.end();
}

Network build_model(const std::string& model_id, int num_classes, int channels, int height,
                    int width) {
  if (num_classes < 2) throw std::invalid_argument("build_model: need at least two classes");
  if (model_id == "victim_resnet") return victim_resnet(num_classes, channels, height, width);
  if (model_id == "surrogate_narrow") {
    return plain_stack(model_id, num_classes, channels, height, width, {16, 32, 64}, false);
  }
  if (model_id == "surrogate_wide") {
    return plain_stack(model_id, num_classes, channels, height, width, {32, 64, 128}, true);
  }
  throw std::invalid_argument("unknown model_id '" + model_id + "'");
}

}  // namespace impart::nn
