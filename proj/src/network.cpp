#include "taildep/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "taildep/parallel.hpp"

namespace taildep {

namespace {

constexpr std::size_t kSlots = 8;  // gradient accumulation slots, fixed

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "conv";
    case LayerKind::MaxPool2D: return "maxpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
  }
  return "unknown";
}

std::size_t argmax_low(const std::vector<double>& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

void apply_relu(std::vector<double>& z) {
  for (double& x : z)
    if (x < 0.0) x = 0.0;
}

void apply_softmax(std::vector<double>& z) {
  double m = z[0];
  for (double x : z) m = std::max(m, x);
  double sum = 0.0;
  for (double& x : z) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : z) x /= sum;
}

void conv_forward(const double* in, Shape3 is, const LayerSpec& sp, const double* w,
                  const double* b, double* out, Shape3 os) {
  const std::size_t icn = is.c;
  const std::size_t kwin = sp.kw * icn;       // contiguous row chunk
  const std::size_t wstride = sp.kh * kwin;   // weights per feature map
  for (std::size_t oy = 0; oy < os.h; ++oy) {
    for (std::size_t ox = 0; ox < os.w; ++ox) {
      const std::size_t ibase = (oy * sp.sh * is.w + ox * sp.sw) * icn;
      double* op = out + (oy * os.w + ox) * os.c;
      for (std::size_t oc = 0; oc < os.c; ++oc) {
        const double* wp = w + oc * wstride;
        double acc = b[oc];
        for (std::size_t r = 0; r < sp.kh; ++r) {
          const double* ip = in + ibase + r * is.w * icn;
          const double* wr = wp + r * kwin;
          for (std::size_t k = 0; k < kwin; ++k) acc += wr[k] * ip[k];
        }
        op[oc] = sp.act == Activation::ReLU && acc < 0.0 ? 0.0 : acc;
      }
    }
  }
}

void conv_backward(const double* in, Shape3 is, const LayerSpec& sp, const double* w,
                   const double* post, const double* dout, Shape3 os, double* dw,
                   double* db, double* din) {
  const std::size_t icn = is.c;
  const std::size_t kwin = sp.kw * icn;
  const std::size_t wstride = sp.kh * kwin;
  const bool relu = sp.act == Activation::ReLU;
  for (std::size_t oy = 0; oy < os.h; ++oy) {
    for (std::size_t ox = 0; ox < os.w; ++ox) {
      const std::size_t ibase = (oy * sp.sh * is.w + ox * sp.sw) * icn;
      const std::size_t obase = (oy * os.w + ox) * os.c;
      for (std::size_t oc = 0; oc < os.c; ++oc) {
        if (relu && post[obase + oc] <= 0.0) continue;
        const double g = dout[obase + oc];
        if (g == 0.0) continue;
        db[oc] += g;
        const double* wp = w + oc * wstride;
        double* dwp = dw + oc * wstride;
        for (std::size_t r = 0; r < sp.kh; ++r) {
          const double* ip = in + ibase + r * is.w * icn;
          double* dip = din + ibase + r * is.w * icn;
          const double* wr = wp + r * kwin;
          double* dwr = dwp + r * kwin;
          for (std::size_t k = 0; k < kwin; ++k) {
            dwr[k] += g * ip[k];
            dip[k] += g * wr[k];
          }
        }
      }
    }
  }
}

void pool_forward(const double* in, Shape3 is, const LayerSpec& sp, double* out,
                  Shape3 os, std::size_t* argmax) {
  for (std::size_t oy = 0; oy < os.h; ++oy) {
    for (std::size_t ox = 0; ox < os.w; ++ox) {
      for (std::size_t ch = 0; ch < os.c; ++ch) {
        std::size_t best_idx = (oy * sp.sh * is.w + ox * sp.sw) * is.c + ch;
        double best = in[best_idx];
        for (std::size_t r = 0; r < sp.kh; ++r) {
          for (std::size_t cc = 0; cc < sp.kw; ++cc) {
            const std::size_t idx =
                ((oy * sp.sh + r) * is.w + (ox * sp.sw + cc)) * is.c + ch;
            // strict comparison keeps the first occurrence on ties
            if (in[idx] > best) {
              best = in[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (oy * os.w + ox) * os.c + ch;
        out[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
}

void dense_forward(const double* x, std::size_t nin, const double* w, const double* b,
                   double* out, std::size_t nout) {
  for (std::size_t o = 0; o < nout; ++o) {
    const double* wr = w + o * nin;
    double acc = b[o];
    for (std::size_t i = 0; i < nin; ++i) acc += wr[i] * x[i];
    out[o] = acc;
  }
}

void dense_backward(const double* x, std::size_t nin, const double* w, const double* dz,
                    std::size_t nout, double* dw, double* db, double* dx) {
  for (std::size_t o = 0; o < nout; ++o) {
    const double g = dz[o];
    db[o] += g;
    if (g == 0.0) continue;
    const double* wr = w + o * nin;
    double* dwr = dw + o * nin;
    for (std::size_t i = 0; i < nin; ++i) {
      dwr[i] += g * x[i];
      dx[i] += g * wr[i];
    }
  }
}

struct LayerSizes {
  std::size_t wlen = 0, blen = 0, fan_in = 0;
};

LayerSizes layer_sizes(const LayerSpec& sp, Shape3 in) {
  LayerSizes s;
  switch (sp.kind) {
    case LayerKind::Conv2D:
      s.fan_in = sp.kh * sp.kw * in.c;
      s.wlen = sp.units * s.fan_in;
      s.blen = sp.units;
      break;
    case LayerKind::Dense:
      s.fan_in = in.count();
      s.wlen = sp.units * s.fan_in;
      s.blen = sp.units;
      break;
    default:
      break;
  }
  return s;
}

void adam_update(std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                 const std::vector<double>& g, double lr, double bc1, double bc2) {
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g[k];
    v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g[k] * g[k];
    p[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + kAdamEps);
  }
}

}  // namespace

Tensor3 tensor3_from_dependence(const DependenceTensor& t) {
  Tensor3 x(t.d, t.d, 2);
  for (std::size_t i = 0; i < t.d; ++i) {
    for (std::size_t j = 0; j < t.d; ++j) {
      x.at(i, j, 0) = t.chi(i, j);
      x.at(i, j, 1) = t.chibar(i, j);
    }
  }
  return x;
}

std::size_t NetworkState::param_count() const {
  std::size_t n = 0;
  for (const LayerParams& p : params) n += p.w.size() + p.b.size();
  return n;
}

std::vector<LayerSpec> classifier_chain(std::size_t classes, std::size_t dense1,
                                        std::size_t dense2) {
  using K = LayerKind;
  using A = Activation;
  return {
      {K::Conv2D, 64, 3, 3, 2, 2, A::ReLU},
      {K::MaxPool2D, 0, 2, 2, 1, 1, A::None},
      {K::Conv2D, 128, 3, 3, 1, 1, A::ReLU},
      {K::Conv2D, 256, 3, 3, 1, 1, A::ReLU},
      {K::MaxPool2D, 0, 2, 2, 1, 1, A::None},
      {K::Flatten, 0, 0, 0, 1, 1, A::None},
      {K::Dense, dense1, 0, 0, 1, 1, A::ReLU},
      {K::Dense, dense2, 0, 0, 1, 1, A::ReLU},
      {K::Dense, classes, 0, 0, 1, 1, A::Softmax},
  };
}

std::vector<Shape3> shape_chain(Shape3 input, const std::vector<LayerSpec>& specs) {
  if (input.h == 0 || input.w == 0 || input.c == 0)
    throw ShapeError("network input has an empty dimension");
  std::vector<Shape3> out;
  out.reserve(specs.size());
  Shape3 cur = input;
  bool flat = false;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& sp = specs[i];
    const std::string where =
        "layer " + std::to_string(i) + " (" + kind_name(sp.kind) + ")";
    switch (sp.kind) {
      case LayerKind::Conv2D:
      case LayerKind::MaxPool2D: {
        if (flat) throw ShapeError(where + " needs a spatial input");
        if (sp.kh == 0 || sp.kw == 0 || sp.sh == 0 || sp.sw == 0)
          throw ShapeError(where + " has a zero kernel or stride");
        if (sp.kind == LayerKind::Conv2D && sp.units == 0)
          throw ShapeError(where + " has zero feature maps");
        if (cur.h < sp.kh || cur.w < sp.kw)
          throw ShapeError(where + " window " + std::to_string(sp.kh) + "x" +
                           std::to_string(sp.kw) + " does not fit its " +
                           std::to_string(cur.h) + "x" + std::to_string(cur.w) +
                           " input");
        const std::size_t nh = (cur.h - sp.kh) / sp.sh + 1;
        const std::size_t nw = (cur.w - sp.kw) / sp.sw + 1;
        cur = {nh, nw, sp.kind == LayerKind::Conv2D ? sp.units : cur.c};
        break;
      }
      case LayerKind::Flatten:
        cur = {1, 1, cur.count()};
        flat = true;
        break;
      case LayerKind::Dense:
        if (sp.units == 0) throw ShapeError(where + " has zero units");
        cur = {1, 1, sp.units};
        flat = true;
        break;
    }
    out.push_back(cur);
  }
  return out;
}

NetworkState build_network_with(Shape3 input, std::vector<LayerSpec> specs,
                                std::size_t classes, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("a classifier needs at least two classes");
  if (specs.empty() || specs.back().kind != LayerKind::Dense ||
      specs.back().units != classes || specs.back().act != Activation::Softmax)
    throw ConfigError("the final layer must be a softmax dense head sized to the classes");
  NetworkState net;
  net.input = input;
  net.classes = classes;
  net.seed = seed;
  net.specs = std::move(specs);
  const std::vector<Shape3> shapes = shape_chain(input, net.specs);

  rng::Philox g = rng::Philox(seed).child(rng::domain::kInit);
  Shape3 cur = input;
  net.params.resize(net.specs.size());
  net.m.resize(net.specs.size());
  net.v.resize(net.specs.size());
  for (std::size_t li = 0; li < net.specs.size(); ++li) {
    const LayerSizes sz = layer_sizes(net.specs[li], cur);
    LayerParams& p = net.params[li];
    p.w.resize(sz.wlen);
    p.b.assign(sz.blen, 0.0);
    if (sz.wlen > 0) {
      const double sd = std::sqrt(2.0 / static_cast<double>(sz.fan_in));
      for (double& wk : p.w) wk = sd * g.normal();
    }
    net.m[li].w.assign(sz.wlen, 0.0);
    net.m[li].b.assign(sz.blen, 0.0);
    net.v[li].w.assign(sz.wlen, 0.0);
    net.v[li].b.assign(sz.blen, 0.0);
    cur = shapes[li];
  }
  net.step = 0;
  return net;
}

NetworkState build_network(std::size_t d, std::size_t classes, std::uint64_t seed,
                           std::size_t dense1, std::size_t dense2) {
  return build_network_with({d, d, 2}, classifier_chain(classes, dense1, dense2),
                            classes, seed);
}

const std::vector<double>& forward_with_trace(const NetworkState& net, const Tensor3& x,
                                              ForwardTrace& tr) {
  if (x.h != net.input.h || x.w != net.input.w || x.c != net.input.c)
    throw ShapeError("input tensor is " + std::to_string(x.h) + "x" +
                     std::to_string(x.w) + "x" + std::to_string(x.c) +
                     " but the network expects " + std::to_string(net.input.h) + "x" +
                     std::to_string(net.input.w) + "x" + std::to_string(net.input.c));
  const std::vector<Shape3> shapes = shape_chain(net.input, net.specs);
  const std::size_t nl = net.specs.size();
  tr.input = x.v;
  tr.act.resize(nl);
  tr.pool_argmax.clear();
  const double* cur = tr.input.data();
  Shape3 cs = net.input;
  for (std::size_t li = 0; li < nl; ++li) {
    const LayerSpec& sp = net.specs[li];
    const Shape3 os = shapes[li];
    std::vector<double>& out = tr.act[li];
    out.assign(os.count(), 0.0);
    switch (sp.kind) {
      case LayerKind::Conv2D:
        conv_forward(cur, cs, sp, net.params[li].w.data(), net.params[li].b.data(),
                     out.data(), os);
        break;
      case LayerKind::MaxPool2D: {
        tr.pool_argmax.emplace_back(os.count(), 0);
        pool_forward(cur, cs, sp, out.data(), os, tr.pool_argmax.back().data());
        break;
      }
      case LayerKind::Flatten:
        std::copy(cur, cur + cs.count(), out.begin());
        break;
      case LayerKind::Dense:
        dense_forward(cur, cs.count(), net.params[li].w.data(),
                      net.params[li].b.data(), out.data(), sp.units);
        if (sp.act == Activation::ReLU) apply_relu(out);
        if (sp.act == Activation::Softmax) apply_softmax(out);
        break;
    }
    cur = out.data();
    cs = os;
  }
  return tr.act.back();
}

std::vector<double> forward(const NetworkState& net, const Tensor3& x) {
  ForwardTrace tr;
  return forward_with_trace(net, x, tr);
}

double cross_entropy(const std::vector<double>& probs, std::size_t label) {
  if (label >= probs.size()) throw ConfigError("class label out of range");
  return -std::log(std::max(probs[label], 1e-12));
}

double l2_penalty(const NetworkState& net, double l2) {
  if (l2 == 0.0) return 0.0;
  double sum = 0.0;
  for (const LayerParams& p : net.params)
    for (double wk : p.w) sum += wk * wk;
  return l2 * sum;
}

double loss_value(const std::vector<double>& probs, std::size_t label,
                  const NetworkState& net, double l2) {
  return cross_entropy(probs, label) + l2_penalty(net, l2);
}

void Gradients::match(const NetworkState& net) {
  g.resize(net.params.size());
  for (std::size_t li = 0; li < g.size(); ++li) {
    g[li].w.assign(net.params[li].w.size(), 0.0);
    g[li].b.assign(net.params[li].b.size(), 0.0);
  }
}

void Gradients::add(const Gradients& other) {
  for (std::size_t li = 0; li < g.size(); ++li) {
    for (std::size_t k = 0; k < g[li].w.size(); ++k) g[li].w[k] += other.g[li].w[k];
    for (std::size_t k = 0; k < g[li].b.size(); ++k) g[li].b[k] += other.g[li].b[k];
  }
}

void Gradients::scale(double s) {
  for (LayerParams& p : g) {
    for (double& wk : p.w) wk *= s;
    for (double& bk : p.b) bk *= s;
  }
}

void backward(const NetworkState& net, const ForwardTrace& trace, std::size_t label,
              double l2, Gradients& grads) {
  const std::vector<Shape3> shapes = shape_chain(net.input, net.specs);
  const std::size_t nl = net.specs.size();
  if (label >= net.classes) throw ConfigError("class label out of range");

  // softmax head with cross-entropy: gradient in the pre-activation is p - y
  std::vector<double> dcur = trace.act[nl - 1];
  dcur[label] -= 1.0;

  std::size_t pool_i = trace.pool_argmax.size();
  std::vector<double> dprev;
  for (std::size_t li = nl; li-- > 0;) {
    const LayerSpec& sp = net.specs[li];
    const double* in = li == 0 ? trace.input.data() : trace.act[li - 1].data();
    const Shape3 is = li == 0 ? net.input : shapes[li - 1];
    const Shape3 os = shapes[li];
    const std::vector<double>& post = trace.act[li];
    switch (sp.kind) {
      case LayerKind::Dense: {
        if (sp.act == Activation::ReLU)
          for (std::size_t o = 0; o < dcur.size(); ++o)
            if (post[o] <= 0.0) dcur[o] = 0.0;
        dprev.assign(is.count(), 0.0);
        dense_backward(in, is.count(), net.params[li].w.data(), dcur.data(),
                       os.count(), grads.g[li].w.data(), grads.g[li].b.data(),
                       dprev.data());
        break;
      }
      case LayerKind::Flatten:
        dprev = std::move(dcur);
        break;
      case LayerKind::MaxPool2D: {
        --pool_i;
        dprev.assign(is.count(), 0.0);
        const std::vector<std::size_t>& am = trace.pool_argmax[pool_i];
        for (std::size_t o = 0; o < os.count(); ++o) dprev[am[o]] += dcur[o];
        break;
      }
      case LayerKind::Conv2D:
        dprev.assign(is.count(), 0.0);
        conv_backward(in, is, sp, net.params[li].w.data(), post.data(), dcur.data(),
                      os, grads.g[li].w.data(), grads.g[li].b.data(), dprev.data());
        break;
    }
    dcur = std::move(dprev);
  }

  if (l2 != 0.0) {
    for (std::size_t li = 0; li < nl; ++li) {
      const std::vector<double>& w = net.params[li].w;
      std::vector<double>& gw = grads.g[li].w;
      for (std::size_t k = 0; k < w.size(); ++k) gw[k] += 2.0 * l2 * w[k];
    }
  }
}

void adam_step(NetworkState& net, const Gradients& grads, double learning_rate) {
  net.step += 1;
  const double t = static_cast<double>(net.step);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t li = 0; li < net.params.size(); ++li) {
    adam_update(net.params[li].w, net.m[li].w, net.v[li].w, grads.g[li].w,
                learning_rate, bc1, bc2);
    adam_update(net.params[li].b, net.m[li].b, net.v[li].b, grads.g[li].b,
                learning_rate, bc1, bc2);
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be positive");
  if (l2 < 0.0 || !std::isfinite(l2)) throw ConfigError("l2 penalty must be nonnegative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (max_epochs == 0) throw ConfigError("epoch budget must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (threads < 1) throw ConfigError("thread count must be positive");
}

bool EarlyStop::observe(std::size_t epoch, double val_loss) {
  if (!seen || val_loss < best) {
    seen = true;
    best = val_loss;
    best_epoch = epoch;
  }
  return epoch >= best_epoch + patience;
}

namespace {

struct EvalCounts {
  double ce_sum = 0.0;
  std::size_t correct = 0;
};

// Per-sample losses land in index-addressed slots and are reduced in index
// order, so the totals do not depend on the thread count.
EvalCounts evaluate_samples(const NetworkState& net, const std::vector<Tensor3>& xs,
                            const std::vector<std::size_t>& ys, int threads) {
  std::vector<double> ce(xs.size(), 0.0);
  std::vector<unsigned char> ok(xs.size(), 0);
  parallel_for(xs.size(), threads, [&](std::size_t i) {
    const std::vector<double> p = forward(net, xs[i]);
    ce[i] = cross_entropy(p, ys[i]);
    ok[i] = argmax_low(p) == ys[i] ? 1 : 0;
  });
  EvalCounts out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.ce_sum += ce[i];
    out.correct += ok[i];
  }
  return out;
}

}  // namespace

TrainResult train(NetworkState net, const std::vector<Tensor3>& train_x,
                  const std::vector<std::size_t>& train_y,
                  const std::vector<Tensor3>& val_x,
                  const std::vector<std::size_t>& val_y, const TrainConfig& cfg,
                  rng::Philox stream) {
  cfg.validate();
  if (train_x.empty()) throw ConfigError("training set is empty");
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size())
    throw ConfigError("sample and label counts disagree");
  for (std::size_t y : train_y)
    if (y >= net.classes) throw ConfigError("class label out of range");
  for (std::size_t y : val_y)
    if (y >= net.classes) throw ConfigError("class label out of range");

  const std::size_t n = train_x.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  if (net.step % batches != 0)
    throw ConfigError("saved optimizer step count is not a whole number of epochs");
  const std::size_t start_epoch = net.step / batches;  // completed epochs
  const int acc_threads =
      std::max(1, std::min(cfg.threads, static_cast<int>(kSlots)));

  TrainResult res;
  EarlyStop stopper;
  stopper.patience = cfg.patience;
  if (cfg.has_prior_best) {
    stopper.seen = true;
    stopper.best = cfg.prior_best_val;
    stopper.best_epoch = cfg.prior_best_epoch;
  }

  std::vector<Gradients> slots(kSlots);
  for (Gradients& s : slots) s.match(net);
  Gradients total;
  total.match(net);
  std::vector<std::size_t> order(n);
  std::vector<double> batch_ce(cfg.batch_size, 0.0);
  std::vector<unsigned char> batch_ok(cfg.batch_size, 0);
  std::vector<ForwardTrace> traces(kSlots);

  for (std::size_t epoch = start_epoch; epoch < cfg.max_epochs; ++epoch) {
    const std::size_t epoch_no = epoch + 1;

    // the shuffle is keyed by the absolute epoch number, so a resumed run
    // replays the same batch order
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng::Philox g = stream.child(epoch_no);
    for (std::size_t i = n; i-- > 1;) {
      const std::size_t j = g.below(i + 1);
      std::swap(order[i], order[j]);
    }

    double epoch_loss_sum = 0.0;
    std::size_t epoch_correct = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t off = b * cfg.batch_size;
      const std::size_t bs = std::min(cfg.batch_size, n - off);
      const std::size_t live = std::min(kSlots, bs);
      for (std::size_t s = 0; s < live; ++s) slots[s].match(net);
      parallel_for(live, acc_threads, [&](std::size_t s) {
        // slot s owns batch positions s, s+8, ... in ascending order
        for (std::size_t p = s; p < bs; p += kSlots) {
          const std::size_t idx = order[off + p];
          const std::vector<double>& probs =
              forward_with_trace(net, train_x[idx], traces[s]);
          batch_ce[p] = cross_entropy(probs, train_y[idx]);
          batch_ok[p] = argmax_low(probs) == train_y[idx] ? 1 : 0;
          backward(net, traces[s], train_y[idx], cfg.l2, slots[s]);
        }
      });
      for (std::size_t li = 0; li < total.g.size(); ++li) {
        std::fill(total.g[li].w.begin(), total.g[li].w.end(), 0.0);
        std::fill(total.g[li].b.begin(), total.g[li].b.end(), 0.0);
      }
      for (std::size_t s = 0; s < live; ++s) total.add(slots[s]);
      total.scale(1.0 / static_cast<double>(bs));

      double ce_sum = 0.0;
      for (std::size_t p = 0; p < bs; ++p) {
        ce_sum += batch_ce[p];
        epoch_correct += batch_ok[p];
      }
      epoch_loss_sum += ce_sum + static_cast<double>(bs) * l2_penalty(net, cfg.l2);

      adam_step(net, total, cfg.learning_rate);
    }

    EpochStats st;
    st.epoch = epoch_no;
    st.train_loss = epoch_loss_sum / static_cast<double>(n);
    st.train_acc = static_cast<double>(epoch_correct) / static_cast<double>(n);
    if (!val_x.empty()) {
      const EvalCounts ev = evaluate_samples(net, val_x, val_y, cfg.threads);
      st.val_loss =
          ev.ce_sum / static_cast<double>(val_x.size()) + l2_penalty(net, cfg.l2);
      st.val_acc = static_cast<double>(ev.correct) / static_cast<double>(val_x.size());
    } else {
      st.val_loss = st.train_loss;
      st.val_acc = st.train_acc;
    }
    res.history.push_back(st);

    const bool worse_streak = stopper.observe(epoch_no, st.val_loss);
    if (stopper.best_epoch == epoch_no) {
      res.best = net;
      res.best_epoch = epoch_no;
    }
    if (cfg.early_stop && worse_streak) break;
  }

  res.last = std::move(net);
  if (res.best_epoch == 0 && !cfg.has_prior_best) {
    // fresh run where nothing was tracked (e.g. zero remaining epochs)
    res.best = res.last;
    res.best_epoch = start_epoch;
  }
  return res;
}

std::pair<std::size_t, std::vector<double>> predict_probs(const NetworkState& net,
                                                          const Tensor3& x) {
  std::vector<double> p = forward(net, x);
  const std::size_t k = argmax_low(p);
  return {k, std::move(p)};
}

std::pair<DependenceClass, std::vector<double>> predict(const NetworkState& net,
                                                        const DependenceTensor& t) {
  auto [k, p] = predict_probs(net, tensor3_from_dependence(t));
  return {static_cast<DependenceClass>(k), std::move(p)};
}

}  // namespace taildep
