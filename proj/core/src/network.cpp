#include "accel2grf/model.hpp"

#include "accel2grf/error.hpp"
#include "accel2grf/io.hpp"
#include "accel2grf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace accel2grf::model {

std::array<LayerSlice, kLayers> layer_layout(const NetworkSpec& spec) {
  const std::array<std::pair<std::size_t, std::size_t>, kLayers> shapes = {{
      {spec.conv1_channels, 3 * 9},
      {spec.conv2_channels, spec.conv1_channels * 9},
      {spec.hidden, spec.flat_size()},
      {spec.k_outputs, spec.hidden},
  }};
  std::array<LayerSlice, kLayers> out{};
  std::size_t offset = 0;
  for (std::size_t l = 0; l < kLayers; ++l) {
    auto& s = out[l];
    s.fan_in = shapes[l].second;
    s.w_offset = offset;
    s.w_count = shapes[l].first * shapes[l].second;
    s.b_offset = s.w_offset + s.w_count;
    s.b_count = shapes[l].first;
    offset = s.b_offset + s.b_count;
  }
  return out;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  const auto layout = layer_layout(spec);
  return layout.back().b_offset + layout.back().b_count;
}

std::string WeightBundle::id() const {
  io::ByteWriter w;
  for (double v : params) w.put_f64(v);
  return io::sha256_hex(w.bytes());
}

namespace {

void check_spec(const NetworkSpec& spec) {
  if (spec.input_size < 4 || spec.conv1_channels == 0 || spec.conv2_channels == 0 || spec.hidden == 0 ||
      spec.k_outputs == 0) {
    throw Error(ErrorCode::InvalidArgument, "network dimensions must be positive (input_size >= 4)");
  }
}

void init_layer(std::vector<double>& params, const LayerSlice& s, std::uint64_t seed, std::size_t layer) {
  Rng rng(seed, layer);
  const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in));
  for (std::size_t i = 0; i < s.w_count; ++i) params[s.w_offset + i] = rng.uniform(-limit, limit);
  std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(s.b_offset), s.b_count, 0.0);
}

bool same_trunk(const NetworkSpec& a, const NetworkSpec& b) {
  return a.input_size == b.input_size && a.conv1_channels == b.conv1_channels &&
         a.conv2_channels == b.conv2_channels && a.hidden == b.hidden && a.linear == b.linear;
}

// out[o] = b[o] + sum_i W[o,i] * in[i], 3x3 kernel, zero padding 1, stride 1.
void conv3x3(const double* in, std::size_t cin, std::size_t n, const double* w, const double* b,
             std::size_t cout, double* out) {
  const std::size_t plane = n * n;
  for (std::size_t o = 0; o < cout; ++o) {
    double* dst = out + o * plane;
    std::fill_n(dst, plane, b[o]);
    for (std::size_t i = 0; i < cin; ++i) {
      const double* src = in + i * plane;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wv = w[((o * cin + i) * 3 + ky) * 3 + kx];
          const std::size_t x_lo = kx == 0 ? 1 : 0;
          const std::size_t x_hi = kx == 2 ? n - 1 : n;
          for (std::size_t y = 0; y < n; ++y) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(n)) continue;
            double* row = dst + y * n;
            const double* srow = src + static_cast<std::size_t>(yy) * n;
            for (std::size_t x = x_lo; x < x_hi; ++x) row[x] += wv * srow[x + kx - 1];
          }
        }
      }
    }
  }
}

void conv3x3_backward(const double* in, std::size_t cin, std::size_t n, const double* w,
                      std::size_t cout, const double* d_out, double* dw, double* db, double* d_in) {
  const std::size_t plane = n * n;
  if (d_in) std::fill_n(d_in, cin * plane, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    const double* g = d_out + o * plane;
    double bias = 0.0;
    for (std::size_t p = 0; p < plane; ++p) bias += g[p];
    db[o] += bias;
    for (std::size_t i = 0; i < cin; ++i) {
      const double* src = in + i * plane;
      double* dsrc = d_in ? d_in + i * plane : nullptr;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t widx = ((o * cin + i) * 3 + ky) * 3 + kx;
          const double wv = w[widx];
          const std::size_t x_lo = kx == 0 ? 1 : 0;
          const std::size_t x_hi = kx == 2 ? n - 1 : n;
          double acc = 0.0;
          for (std::size_t y = 0; y < n; ++y) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(n)) continue;
            const double* grow = g + y * n;
            const double* srow = src + static_cast<std::size_t>(yy) * n;
            for (std::size_t x = x_lo; x < x_hi; ++x) acc += grow[x] * srow[x + kx - 1];
            if (dsrc) {
              double* drow = dsrc + static_cast<std::size_t>(yy) * n;
              for (std::size_t x = x_lo; x < x_hi; ++x) drow[x + kx - 1] += wv * grow[x];
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
}

// 2x2 stride-2 max pool; arg holds the in-plane index of each winner (first max wins).
void maxpool2(const double* in, std::size_t c, std::size_t n, double* out, std::uint32_t* arg) {
  const std::size_t m = n / 2;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = in + ch * n * n;
    for (std::size_t py = 0; py < m; ++py) {
      for (std::size_t px = 0; px < m; ++px) {
        std::size_t best = (2 * py) * n + 2 * px;
        for (std::size_t idx : {best + 1, best + n, best + n + 1}) {
          if (src[idx] > src[best]) best = idx;
        }
        out[(ch * m + py) * m + px] = src[best];
        arg[(ch * m + py) * m + px] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool2_backward(const double* d_out, const std::uint32_t* arg, std::size_t c, std::size_t n,
                       double* d_in) {
  const std::size_t m = n / 2;
  std::fill_n(d_in, c * n * n, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < m * m; ++p) d_in[ch * n * n + arg[ch * m * m + p]] = d_out[ch * m * m + p];
  }
}

void relu(std::vector<double>& v) {
  for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

void relu_mask(const std::vector<double>& activ, std::vector<double>& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activ[i] > 0.0)) grad[i] = 0.0;
  }
}

}  // namespace

WeightBundle init_network(const NetworkSpec& spec, std::uint64_t seed, const WeightBundle* parent) {
  check_spec(spec);
  WeightBundle b;
  b.spec = spec;
  b.rng_seed = seed;
  b.params.assign(parameter_count(spec), 0.0);
  const auto layout = layer_layout(spec);
  if (parent) {
    if (!same_trunk(parent->spec, spec)) {
      throw Error(ErrorCode::ArchitectureMismatch, "parent network differs outside the output layer");
    }
    const auto playout = layer_layout(parent->spec);
    const std::size_t copied = parent->spec.k_outputs == spec.k_outputs ? kLayers : kLayers - 1;
    for (std::size_t l = 0; l < copied; ++l) {
      const auto& s = playout[l];
      std::copy_n(parent->params.begin() + static_cast<std::ptrdiff_t>(s.w_offset), s.w_count + s.b_count,
                  b.params.begin() + static_cast<std::ptrdiff_t>(layout[l].w_offset));
    }
    for (std::size_t l = copied; l < kLayers; ++l) init_layer(b.params, layout[l], seed, l);
    b.parent_id = parent->id();
  } else {
    for (std::size_t l = 0; l < kLayers; ++l) init_layer(b.params, layout[l], seed, l);
  }
  return b;
}

std::vector<double> image_to_input(const encode::Image& image) {
  const std::size_t plane = image.height * image.width;
  std::vector<double> input(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t ch = 0; ch < 3; ++ch) input[ch * plane + p] = image.pixels[p * 3 + ch] / 255.0;
  }
  return input;
}

void forward_into(const NetworkSpec& spec, const std::vector<double>& params, Workspace& ws) {
  const std::size_t n0 = spec.input_size;
  const std::size_t n1 = spec.pooled1();
  const std::size_t n2 = spec.pooled2();
  if (ws.input.size() != 3 * n0 * n0) {
    throw Error(ErrorCode::DimensionMismatch, "input does not match the network input size");
  }
  if (params.size() != parameter_count(spec)) throw Error(ErrorCode::DimensionMismatch, "parameter count mismatch");
  const auto layout = layer_layout(spec);
  const double* p = params.data();

  ws.conv1.resize(spec.conv1_channels * n0 * n0);
  conv3x3(ws.input.data(), 3, n0, p + layout[0].w_offset, p + layout[0].b_offset, spec.conv1_channels,
          ws.conv1.data());
  if (!spec.linear) relu(ws.conv1);
  ws.pool1.resize(spec.conv1_channels * n1 * n1);
  ws.arg1.resize(ws.pool1.size());
  maxpool2(ws.conv1.data(), spec.conv1_channels, n0, ws.pool1.data(), ws.arg1.data());

  ws.conv2.resize(spec.conv2_channels * n1 * n1);
  conv3x3(ws.pool1.data(), spec.conv1_channels, n1, p + layout[1].w_offset, p + layout[1].b_offset,
          spec.conv2_channels, ws.conv2.data());
  if (!spec.linear) relu(ws.conv2);
  ws.pool2.resize(spec.conv2_channels * n2 * n2);
  ws.arg2.resize(ws.pool2.size());
  maxpool2(ws.conv2.data(), spec.conv2_channels, n1, ws.pool2.data(), ws.arg2.data());

  const std::size_t flat = spec.flat_size();
  ws.hidden.resize(spec.hidden);
  for (std::size_t j = 0; j < spec.hidden; ++j) {
    const double* row = p + layout[2].w_offset + j * flat;
    double acc = p[layout[2].b_offset + j];
    for (std::size_t f = 0; f < flat; ++f) acc += row[f] * ws.pool2[f];
    ws.hidden[j] = acc;
  }
  if (!spec.linear) relu(ws.hidden);

  ws.output.resize(spec.k_outputs);
  for (std::size_t k = 0; k < spec.k_outputs; ++k) {
    const double* row = p + layout[3].w_offset + k * spec.hidden;
    double acc = p[layout[3].b_offset + k];
    for (std::size_t j = 0; j < spec.hidden; ++j) acc += row[j] * ws.hidden[j];
    ws.output[k] = acc;
  }
}

std::vector<double> forward_real(const WeightBundle& bundle, const std::vector<double>& input) {
  Workspace ws;
  ws.input = input;
  forward_into(bundle.spec, bundle.params, ws);
  return ws.output;
}

std::vector<double> forward(const WeightBundle& bundle, const encode::Image& image) {
  if (image.height != bundle.spec.input_size || image.width != bundle.spec.input_size) {
    throw Error(ErrorCode::DimensionMismatch,
                "image is " + std::to_string(image.height) + "x" + std::to_string(image.width) + ", network expects " +
                    std::to_string(bundle.spec.input_size));
  }
  return forward_real(bundle, image_to_input(image));
}

double euclidean_loss(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& target) {
  if (pred.empty() || pred.size() != target.size()) throw Error(ErrorCode::ShapeMismatch, "batch sizes differ or are empty");
  double sum = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    if (pred[n].size() != target[n].size()) throw Error(ErrorCode::ShapeMismatch, "vector lengths differ");
    for (std::size_t k = 0; k < pred[n].size(); ++k) {
      const double d = pred[n][k] - target[n][k];
      sum += d * d;
    }
  }
  return sum / (2.0 * static_cast<double>(pred.size()));
}

void backward_into(const NetworkSpec& spec, const std::vector<double>& params, Workspace& ws,
                   const std::vector<double>& d_output, std::vector<double>& grad, BackwardFault fault) {
  const std::size_t n0 = spec.input_size;
  const std::size_t n1 = spec.pooled1();
  const std::size_t flat = spec.flat_size();
  const auto layout = layer_layout(spec);
  const double* p = params.data();
  double* g = grad.data();

  // output layer
  ws.d_hidden.assign(spec.hidden, 0.0);
  for (std::size_t k = 0; k < spec.k_outputs; ++k) {
    const double dk = d_output[k];
    double* gw = g + layout[3].w_offset + k * spec.hidden;
    const double* w = p + layout[3].w_offset + k * spec.hidden;
    for (std::size_t j = 0; j < spec.hidden; ++j) {
      gw[j] += dk * ws.hidden[j];
      ws.d_hidden[j] += w[j] * dk;
    }
    g[layout[3].b_offset + k] += dk;
  }
  if (!spec.linear && fault != BackwardFault::IgnoreHiddenRelu) relu_mask(ws.hidden, ws.d_hidden);

  // hidden layer
  ws.d_pool2.assign(flat, 0.0);
  for (std::size_t j = 0; j < spec.hidden; ++j) {
    const double dj = ws.d_hidden[j];
    double* gw = g + layout[2].w_offset + j * flat;
    const double* w = p + layout[2].w_offset + j * flat;
    for (std::size_t f = 0; f < flat; ++f) {
      gw[f] += dj * ws.pool2[f];
      ws.d_pool2[f] += w[f] * dj;
    }
    g[layout[2].b_offset + j] += dj;
  }

  ws.d_conv2.resize(ws.conv2.size());
  maxpool2_backward(ws.d_pool2.data(), ws.arg2.data(), spec.conv2_channels, n1, ws.d_conv2.data());
  if (!spec.linear) relu_mask(ws.conv2, ws.d_conv2);
  ws.d_pool1.resize(ws.pool1.size());
  conv3x3_backward(ws.pool1.data(), spec.conv1_channels, n1, p + layout[1].w_offset, spec.conv2_channels,
                   ws.d_conv2.data(), g + layout[1].w_offset, g + layout[1].b_offset, ws.d_pool1.data());

  ws.d_conv1.resize(ws.conv1.size());
  maxpool2_backward(ws.d_pool1.data(), ws.arg1.data(), spec.conv1_channels, n0, ws.d_conv1.data());
  if (!spec.linear) relu_mask(ws.conv1, ws.d_conv1);
  conv3x3_backward(ws.input.data(), 3, n0, p + layout[0].w_offset, spec.conv1_channels, ws.d_conv1.data(),
                   g + layout[0].w_offset, g + layout[0].b_offset, nullptr);
}

double loss_and_gradient(const WeightBundle& bundle, const std::vector<encode::Image>& images,
                         const std::vector<std::vector<double>>& targets, std::vector<double>& grad,
                         BackwardFault fault) {
  if (images.empty() || images.size() != targets.size()) throw Error(ErrorCode::ShapeMismatch, "batch sizes differ or are empty");
  grad.assign(bundle.params.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(images.size());
  Workspace ws;
  std::vector<double> d_out(bundle.spec.k_outputs);
  double sum = 0.0;
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (targets[n].size() != bundle.spec.k_outputs) throw Error(ErrorCode::ShapeMismatch, "target length differs from K");
    ws.input = image_to_input(images[n]);
    forward_into(bundle.spec, bundle.params, ws);
    for (std::size_t k = 0; k < d_out.size(); ++k) {
      const double d = ws.output[k] - targets[n][k];
      sum += d * d;
      d_out[k] = d * inv_n;
    }
    backward_into(bundle.spec, bundle.params, ws, d_out, grad, fault);
  }
  return sum * 0.5 * inv_n;
}

namespace {

// ReLU decisions and max-pool winners of one forward pass.
void append_pattern(const NetworkSpec& spec, const Workspace& ws, std::vector<std::uint32_t>& out) {
  out.insert(out.end(), ws.arg1.begin(), ws.arg1.end());
  out.insert(out.end(), ws.arg2.begin(), ws.arg2.end());
  if (spec.linear) return;
  for (const auto* v : {&ws.conv1, &ws.conv2, &ws.hidden}) {
    for (double x : *v) out.push_back(x > 0.0 ? 1u : 0u);
  }
}

struct Probe {
  std::vector<std::vector<double>> outputs;
  std::vector<std::uint32_t> pattern;
};

Probe probe(const NetworkSpec& spec, const std::vector<double>& params, const std::vector<std::vector<double>>& inputs) {
  Probe pr;
  Workspace ws;
  for (const auto& in : inputs) {
    ws.input = in;
    forward_into(spec, params, ws);
    pr.outputs.push_back(ws.output);
    append_pattern(spec, ws, pr.pattern);
  }
  return pr;
}

}  // namespace

GradCheckResult grad_check(const WeightBundle& bundle, const std::vector<encode::Image>& images,
                           const std::vector<std::vector<double>>& targets, double h, BackwardFault fault) {
  std::vector<double> analytic;
  loss_and_gradient(bundle, images, targets, analytic, fault);
  std::vector<std::vector<double>> inputs;
  for (const auto& im : images) inputs.push_back(image_to_input(im));
  const auto base = probe(bundle.spec, bundle.params, inputs);
  const double denom = 2.0 * static_cast<double>(images.size()) * 2.0 * h;

  GradCheckResult res;
  auto params = bundle.params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const auto plus = probe(bundle.spec, params, inputs);
    params[i] = saved - h;
    const auto minus = probe(bundle.spec, params, inputs);
    params[i] = saved;
    if (plus.pattern != base.pattern || minus.pattern != base.pattern) {
      ++res.skipped_kinks;
      continue;
    }
    // L+ - L- summed as (a - b)(a + b - 2t) to avoid cancelling two O(1) losses.
    double diff = 0.0;
    for (std::size_t n = 0; n < inputs.size(); ++n) {
      for (std::size_t k = 0; k < targets[n].size(); ++k) {
        const double a = plus.outputs[n][k];
        const double b = minus.outputs[n][k];
        diff += (a - b) * (a + b - 2.0 * targets[n][k]);
      }
    }
    const double numeric = diff / denom;
    const double err = std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    res.max_rel_error = std::max(res.max_rel_error, err);
    ++res.checked;
  }
  return res;
}

}  // namespace accel2grf::model
