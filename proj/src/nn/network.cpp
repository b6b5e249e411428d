#include "lsr/nn/network.hpp"

#include <cmath>
#include <map>

#include "lsr/error.hpp"

namespace lsr::nn {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::TransposedConv: return "tconv";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Concat: return "concat";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "tconv") return LayerKind::TransposedConv;
  if (s == "batchnorm") return LayerKind::BatchNorm;
  if (s == "relu") return LayerKind::ReLU;
  if (s == "avgpool") return LayerKind::AvgPool;
  if (s == "dropout") return LayerKind::Dropout;
  if (s == "concat") return LayerKind::Concat;
  throw FormatError("unknown layer kind '" + s + "'");
}

}  // namespace

int NetworkSpec::layer_index(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<Shape> NetworkSpec::check_shapes(int in_h, int in_w) const {
  std::vector<Shape> out;
  out.reserve(layers.size());
  Shape cur{input_channels, in_h, in_w};
  const auto fail = [&](std::size_t i, const std::string& why) {
    throw ConfigError("network layer " + std::to_string(i) + " (" + layers[i].name + "): " + why +
                      " [input " + std::to_string(cur.c) + "x" + std::to_string(cur.h) + "x" +
                      std::to_string(cur.w) + "]");
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::Conv: {
        if (cur.c != l.conv.in_ch) fail(i, "channel mismatch");
        const int oh = l.conv.conv_out_h(cur.h), ow = l.conv.conv_out_w(cur.w);
        if (oh < 1 || ow < 1) fail(i, "empty output");
        if ((oh - 1) * l.conv.sh != cur.h + 2 * l.conv.ph - l.conv.kh ||
            (ow - 1) * l.conv.sw != cur.w + 2 * l.conv.pw - l.conv.kw)
          fail(i, "stride does not tile the padded input");
        cur = {l.conv.out_ch, oh, ow};
        break;
      }
      case LayerKind::TransposedConv: {
        if (cur.c != l.conv.in_ch) fail(i, "channel mismatch");
        const int oh = l.conv.tconv_out_h(cur.h), ow = l.conv.tconv_out_w(cur.w);
        if (oh < 1 || ow < 1) fail(i, "empty output");
        cur = {l.conv.out_ch, oh, ow};
        break;
      }
      case LayerKind::BatchNorm:
        if (cur.c != l.channels) fail(i, "channel mismatch");
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::AvgPool:
        if (l.pool < 1 || cur.h % l.pool != 0 || cur.w % l.pool != 0)
          fail(i, "dims not divisible by pool size");
        cur = {cur.c, cur.h / l.pool, cur.w / l.pool};
        break;
      case LayerKind::Dropout:
        if (l.rate < 0.0f || l.rate >= 1.0f) fail(i, "dropout rate must be in [0, 1)");
        break;
      case LayerKind::Concat: {
        const int src = layer_index(l.skip_source);
        if (src < 0 || src >= static_cast<int>(i)) fail(i, "skip source must precede the sink");
        const Shape s = out[src];
        if (s.h != cur.h || s.w != cur.w) fail(i, "skip spatial dims differ");
        cur = {cur.c + s.c, cur.h, cur.w};
        break;
      }
    }
    out.push_back(cur);
  }
  if (layers.empty()) throw ConfigError("network has no layers");
  return out;
}

nlohmann::ordered_json NetworkSpec::to_json() const {
  nlohmann::ordered_json j;
  j["upscale_factor"] = upscale_factor;
  j["input_channels"] = input_channels;
  j["layers"] = nlohmann::ordered_json::array();
  for (const LayerSpec& l : layers) {
    nlohmann::ordered_json r;
    r["kind"] = kind_name(l.kind);
    r["name"] = l.name;
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::TransposedConv:
        r["in"] = l.conv.in_ch;
        r["out"] = l.conv.out_ch;
        r["k"] = {l.conv.kh, l.conv.kw};
        r["s"] = {l.conv.sh, l.conv.sw};
        r["p"] = {l.conv.ph, l.conv.pw};
        break;
      case LayerKind::BatchNorm:
        r["channels"] = l.channels;
        r["momentum"] = l.momentum;
        r["eps"] = l.eps;
        break;
      case LayerKind::AvgPool:
        r["pool"] = l.pool;
        break;
      case LayerKind::Dropout:
        r["rate"] = l.rate;
        break;
      case LayerKind::Concat:
        r["source"] = l.skip_source;
        break;
      case LayerKind::ReLU:
        break;
    }
    j["layers"].push_back(std::move(r));
  }
  return j;
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  try {
    spec.upscale_factor = j.at("upscale_factor").get<int>();
    spec.input_channels = j.at("input_channels").get<int>();
    for (const auto& r : j.at("layers")) {
      LayerSpec l;
      l.kind = kind_from_name(r.at("kind").get<std::string>());
      l.name = r.at("name").get<std::string>();
      switch (l.kind) {
        case LayerKind::Conv:
        case LayerKind::TransposedConv:
          l.conv.in_ch = r.at("in").get<int>();
          l.conv.out_ch = r.at("out").get<int>();
          l.conv.kh = r.at("k")[0].get<int>();
          l.conv.kw = r.at("k")[1].get<int>();
          l.conv.sh = r.at("s")[0].get<int>();
          l.conv.sw = r.at("s")[1].get<int>();
          l.conv.ph = r.at("p")[0].get<int>();
          l.conv.pw = r.at("p")[1].get<int>();
          break;
        case LayerKind::BatchNorm:
          l.channels = r.at("channels").get<int>();
          l.momentum = r.at("momentum").get<float>();
          l.eps = r.at("eps").get<float>();
          break;
        case LayerKind::AvgPool:
          l.pool = r.at("pool").get<int>();
          break;
        case LayerKind::Dropout:
          l.rate = r.at("rate").get<float>();
          break;
        case LayerKind::Concat:
          l.skip_source = r.at("source").get<std::string>();
          break;
        case LayerKind::ReLU:
          break;
      }
      spec.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("network spec json: ") + e.what());
  }
  return spec;
}

NetworkSpec build_srnet(int factor, int base_filters, float dropout_rate) {
  if (factor != 2 && factor != 4 && factor != 8)
    throw ConfigError("build_srnet: factor must be 2, 4 or 8");
  if (base_filters < 1) throw ConfigError("build_srnet: base_filters must be >= 1");
  if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
    throw ConfigError("build_srnet: dropout rate must be in [0, 1)");

  NetworkSpec spec;
  spec.upscale_factor = factor;
  spec.input_channels = 1;
  const int f = base_filters;

  const auto conv = [&](const std::string& name, int in, int out, int kh, int kw, int sh, int sw,
                        int ph, int pw) {
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.name = name;
    l.conv = {in, out, kh, kw, sh, sw, ph, pw};
    spec.layers.push_back(l);
  };
  const auto tconv = [&](const std::string& name, int in, int out, int kh, int kw, int sh, int sw,
                         int ph, int pw) {
    LayerSpec l;
    l.kind = LayerKind::TransposedConv;
    l.name = name;
    l.conv = {in, out, kh, kw, sh, sw, ph, pw};
    spec.layers.push_back(l);
  };
  const auto bn = [&](const std::string& name, int ch) {
    LayerSpec l;
    l.kind = LayerKind::BatchNorm;
    l.name = name;
    l.channels = ch;
    spec.layers.push_back(l);
  };
  const auto relu = [&](const std::string& name) {
    LayerSpec l;
    l.kind = LayerKind::ReLU;
    l.name = name;
    spec.layers.push_back(l);
  };
  const auto drop = [&](const std::string& name) {
    LayerSpec l;
    l.kind = LayerKind::Dropout;
    l.name = name;
    l.rate = dropout_rate;
    spec.layers.push_back(l);
  };
  const auto pool = [&](const std::string& name) {
    LayerSpec l;
    l.kind = LayerKind::AvgPool;
    l.name = name;
    l.pool = 2;
    spec.layers.push_back(l);
  };
  const auto concat = [&](const std::string& name, const std::string& src) {
    LayerSpec l;
    l.kind = LayerKind::Concat;
    l.name = name;
    l.skip_source = src;
    spec.layers.push_back(l);
  };

  // Input stage: vertical-only x2 upscales until the row count matches.
  const int stages = factor == 2 ? 1 : (factor == 4 ? 2 : 3);
  for (int s = 0; s < stages; ++s) {
    const std::string nm = "up" + std::to_string(s);
    tconv(nm, s == 0 ? 1 : f, f, 4, 3, 2, 1, 1, 1);
    bn(nm + "_bn", f);
    relu(nm + "_relu");
  }

  const int ch[4] = {f, 2 * f, 4 * f, 8 * f};
  for (int lvl = 0; lvl < 4; ++lvl) {
    const std::string nm = "enc" + std::to_string(lvl);
    const int in = lvl == 0 ? f : ch[lvl - 1];
    drop(nm + "_in");
    conv(nm + "_conv0", in, ch[lvl], 3, 3, 1, 1, 1, 1);
    bn(nm + "_bn0", ch[lvl]);
    relu(nm + "_relu0");
    conv(nm + "_conv1", ch[lvl], ch[lvl], 3, 3, 1, 1, 1, 1);
    bn(nm + "_bn1", ch[lvl]);
    relu(nm + "_relu1");
    drop(nm + "_out");
    if (lvl < 3) pool(nm + "_pool");
  }

  for (int lvl = 2; lvl >= 0; --lvl) {
    const std::string nm = "dec" + std::to_string(lvl);
    tconv(nm + "_up", ch[lvl + 1], ch[lvl], 4, 4, 2, 2, 1, 1);
    bn(nm + "_up_bn", ch[lvl]);
    relu(nm + "_up_relu");
    concat(nm + "_concat", "enc" + std::to_string(lvl) + "_out");
    drop(nm + "_in");
    conv(nm + "_conv0", 2 * ch[lvl], ch[lvl], 3, 3, 1, 1, 1, 1);
    bn(nm + "_bn0", ch[lvl]);
    relu(nm + "_relu0");
    conv(nm + "_conv1", ch[lvl], ch[lvl], 3, 3, 1, 1, 1, 1);
    bn(nm + "_bn1", ch[lvl]);
    relu(nm + "_relu1");
    drop(nm + "_out");
  }

  conv("out", f, 1, 3, 3, 1, 1, 1, 1);  // single filter, linear, no batch norm

  spec.check_shapes(64 / factor, 64);
  return spec;
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkParams params;
  params.layers.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams& p = params.layers[i];
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::TransposedConv) {
      Rng rng = Rng::keyed(seed, {0x1A11ull, i});
      const double fan_in = static_cast<double>(l.conv.in_ch) * l.conv.kh * l.conv.kw;
      const double limit = std::sqrt(6.0 / fan_in);  // He-uniform
      p.weight.resize(l.conv.weight_count());
      for (float& w : p.weight) w = static_cast<float>(rng.uniform(-limit, limit));
      p.bias.assign(l.conv.out_ch, 0.0f);
    } else if (l.kind == LayerKind::BatchNorm) {
      p.gamma.assign(l.channels, 1.0f);
      p.beta.assign(l.channels, 0.0f);
      p.running_mean.assign(l.channels, 0.0f);
      p.running_var.assign(l.channels, 1.0f);
    }
  }
  return params;
}

AdamState init_adam(const NetworkSpec& spec) {
  AdamState st;
  st.step = 0;
  st.m.layers.resize(spec.layers.size());
  st.v.layers.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    for (NetworkParams* s : {&st.m, &st.v}) {
      LayerParams& p = s->layers[i];
      if (l.kind == LayerKind::Conv || l.kind == LayerKind::TransposedConv) {
        p.weight.assign(l.conv.weight_count(), 0.0f);
        p.bias.assign(l.conv.out_ch, 0.0f);
      } else if (l.kind == LayerKind::BatchNorm) {
        p.gamma.assign(l.channels, 0.0f);
        p.beta.assign(l.channels, 0.0f);
      }
    }
  }
  return st;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::TransposedConv)
      n += l.conv.weight_count() + l.conv.out_ch;
    else if (l.kind == LayerKind::BatchNorm)
      n += 2 * static_cast<std::size_t>(l.channels);
  }
  return n;
}

namespace {

Tensor4 run_forward(const NetworkSpec& spec, const NetworkParams& params_in,
                    NetworkParams* params_mut, const Tensor4& x, bool bn_training,
                    bool dropout_active, Rng* rng, ForwardCache* cache) {
  if (spec.layers.size() != params_in.layers.size())
    throw ConfigError("forward: params do not match spec layer count");
  if (x.c != spec.input_channels)
    throw ConfigError("forward: input has " + std::to_string(x.c) + " channels, expected " +
                      std::to_string(spec.input_channels));
  spec.check_shapes(x.h, x.w);

  std::vector<Tensor4> acts;
  acts.reserve(spec.layers.size() + 1);
  acts.push_back(x);
  if (cache) {
    cache->bn.assign(spec.layers.size(), {});
    cache->dropout_mask.assign(spec.layers.size(), {});
  }

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const LayerParams& p = params_in.layers[i];
    const Tensor4& in = acts.back();
    Tensor4 out;
    switch (l.kind) {
      case LayerKind::Conv:
        out = conv2d_forward(in, l.conv, p.weight, p.bias);
        break;
      case LayerKind::TransposedConv:
        out = tconv2d_forward(in, l.conv, p.weight, p.bias);
        break;
      case LayerKind::BatchNorm: {
        // Running stats update only in training mode (and only when the
        // caller handed us a mutable params object).
        std::vector<float>* rm;
        std::vector<float>* rv;
        std::vector<float> scratch_m, scratch_v;
        if (bn_training && params_mut) {
          rm = &params_mut->layers[i].running_mean;
          rv = &params_mut->layers[i].running_var;
        } else {
          scratch_m = p.running_mean;
          scratch_v = p.running_var;
          rm = &scratch_m;
          rv = &scratch_v;
        }
        out = batchnorm_forward<float>(in, l.momentum, l.eps, bn_training, p.gamma, p.beta, *rm,
                                       *rv, cache ? &cache->bn[i] : nullptr);
        break;
      }
      case LayerKind::ReLU:
        out = relu_forward(in);
        break;
      case LayerKind::AvgPool:
        out = avgpool_forward(in, l.pool);
        break;
      case LayerKind::Dropout: {
        if (dropout_active && !rng) throw ConfigError("forward: dropout active but no rng");
        Rng dummy(0);
        out = dropout_forward(in, l.rate, dropout_active, rng ? *rng : dummy,
                              cache ? &cache->dropout_mask[i] : nullptr);
        break;
      }
      case LayerKind::Concat: {
        const int src = spec.layer_index(l.skip_source);
        if (src < 0) throw ConfigError("forward: missing skip source " + l.skip_source);
        out = concat_forward(in, acts[src + 1]);
        break;
      }
    }
    acts.push_back(std::move(out));
  }

  Tensor4 y = acts.back();
  if (cache) cache->acts = std::move(acts);
  return y;
}

}  // namespace

Tensor4 forward_train(const NetworkSpec& spec, NetworkParams& params, const Tensor4& x, Rng& rng,
                      ForwardCache* cache) {
  return run_forward(spec, params, &params, x, /*bn_training=*/true, /*dropout_active=*/true,
                     &rng, cache);
}

Tensor4 forward_eval(const NetworkSpec& spec, const NetworkParams& params, const Tensor4& x) {
  return run_forward(spec, params, nullptr, x, false, false, nullptr, nullptr);
}

Tensor4 forward_mc(const NetworkSpec& spec, const NetworkParams& params, const Tensor4& x,
                   Rng& rng) {
  return run_forward(spec, params, nullptr, x, false, true, &rng, nullptr);
}

NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       const ForwardCache& cache, const Tensor4& dy) {
  if (cache.acts.size() != spec.layers.size() + 1)
    throw ConfigError("backward: cache does not match spec");
  NetworkParams grads;
  grads.layers.resize(spec.layers.size());

  // Gradients flowing into each layer's *output*, accumulated lazily so
  // concat sinks can push back into their skip sources.
  std::vector<Tensor4> pending(spec.layers.size() + 1);
  pending[spec.layers.size()] = dy;

  const auto add_into = [](Tensor4& dst, const Tensor4& src) {
    if (dst.size() == 0) {
      dst = src;
      return;
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
  };

  for (int i = static_cast<int>(spec.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& l = spec.layers[i];
    const LayerParams& p = params.layers[i];
    Tensor4& grad_out = pending[i + 1];
    if (grad_out.size() == 0) grad_out = Tensor4::zeros_like(cache.acts[i + 1]);
    const Tensor4& in = cache.acts[i];
    Tensor4 dx;
    switch (l.kind) {
      case LayerKind::Conv:
        conv2d_backward_params(in, l.conv, grad_out, &grads.layers[i].weight,
                               &grads.layers[i].bias);
        dx = conv2d_backward_input(grad_out, l.conv, p.weight, in.h, in.w);
        break;
      case LayerKind::TransposedConv:
        tconv2d_backward_params(in, l.conv, grad_out, &grads.layers[i].weight,
                                &grads.layers[i].bias);
        dx = tconv2d_backward_input(grad_out, l.conv, p.weight);
        break;
      case LayerKind::BatchNorm:
        batchnorm_backward(cache.bn[i], p.gamma, grad_out, &dx, &grads.layers[i].gamma,
                           &grads.layers[i].beta);
        break;
      case LayerKind::ReLU:
        dx = relu_backward(cache.acts[i + 1], grad_out);
        break;
      case LayerKind::AvgPool:
        dx = avgpool_backward(grad_out, l.pool);
        break;
      case LayerKind::Dropout:
        dx = dropout_backward(grad_out, cache.dropout_mask[i]);
        break;
      case LayerKind::Concat: {
        const int src = spec.layer_index(l.skip_source);
        Tensor4 dskip;
        concat_backward(grad_out, in.c, &dx, &dskip);
        add_into(pending[src + 1], dskip);
        break;
      }
    }
    add_into(pending[i], dx);
    grad_out = Tensor4();  // free as we go
  }
  return grads;
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, float lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  const auto update = [&](std::vector<float>& p, const std::vector<float>& g,
                          std::vector<float>& m, std::vector<float>& v) {
    if (g.empty()) return;
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
      throw ConfigError("adam: moment arrays not congruent with parameters");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = beta1 * m[i] + (1.0 - beta1) * gi;
      const double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      p[i] -= static_cast<float>(lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
    }
  };

  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grads.layers[i].weight, state.m.layers[i].weight,
           state.v.layers[i].weight);
    update(params.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias,
           state.v.layers[i].bias);
    update(params.layers[i].gamma, grads.layers[i].gamma, state.m.layers[i].gamma,
           state.v.layers[i].gamma);
    update(params.layers[i].beta, grads.layers[i].beta, state.m.layers[i].beta,
           state.v.layers[i].beta);
  }
}

}  // namespace lsr::nn
