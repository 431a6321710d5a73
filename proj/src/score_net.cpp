#include "otfwi/score_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "otfwi/error.hpp"
#include "otfwi/kernels/vector.hpp"
#include "otfwi/rng.hpp"

namespace otfwi {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double silu(double z) { return z * sigmoid(z); }
double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

// A stack of channel planes with a one-pixel zero border, so that the 3×3
// convolution becomes nine shifted axpys over one contiguous range.
struct Planes {
  int c = 0, h = 0, w = 0;
  std::vector<double> data;

  Planes() = default;
  Planes(int c_, int h_, int w_) : c(c_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * (h_ + 2) * (w_ + 2), 0.0) {}
  int wp() const { return w + 2; }
  std::size_t plane() const { return static_cast<std::size_t>(h + 2) * (w + 2); }
  double* ptr(int ch) { return data.data() + ch * plane(); }
  const double* ptr(int ch) const { return data.data() + ch * plane(); }
  double& at(int ch, int a, int b) { return ptr(ch)[(a + 1) * wp() + (b + 1)]; }
  double at(int ch, int a, int b) const { return ptr(ch)[(a + 1) * wp() + (b + 1)]; }
  // Contiguous range covering every interior pixel.
  std::size_t first() const { return static_cast<std::size_t>(wp()) + 1; }
  std::size_t span() const { return static_cast<std::size_t>(h - 1) * wp() + w; }
  void zero_border() {
    for (int ch = 0; ch < c; ++ch) {
      double* p = ptr(ch);
      for (int b = 0; b < w + 2; ++b) p[b] = p[(h + 1) * wp() + b] = 0.0;
      for (int a = 0; a < h + 2; ++a) p[a * wp()] = p[a * wp() + w + 1] = 0.0;
    }
  }
};

struct Conv {
  std::size_t w = 0, b = 0;  // parameter offsets
  int cin = 0, cout = 0;
};

struct Linear {
  std::size_t w = 0, b = 0;
  int in = 0, out = 0;
};

// out = conv(in) + bias[o] + extra[o]
void conv_forward(const double* p, const Conv& cv, const Planes& in, const std::vector<double>& extra, Planes& out) {
  const auto& k = kernels::active();
  const std::size_t f = in.first(), n = in.span();
  const std::ptrdiff_t wp = in.wp();
  for (int o = 0; o < cv.cout; ++o) {
    double* dst = out.ptr(o);
    const double bias = p[cv.b + o] + (extra.empty() ? 0.0 : extra[o]);
    for (std::size_t q = f; q < f + n; ++q) dst[q] = bias;
    for (int c = 0; c < cv.cin; ++c) {
      const double* src = in.ptr(c);
      const double* wk = p + cv.w + (static_cast<std::size_t>(o) * cv.cin + c) * 9;
      for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx) {
          const std::ptrdiff_t off = (dy - 1) * wp + (dx - 1);
          k.axpy(n, wk[dy * 3 + dx], src + f + off, dst + f);
        }
    }
  }
  out.zero_border();
}

// d_out has a zero border. Accumulates parameter and input gradients.
void conv_backward(const double* p, const Conv& cv, const Planes& in, const Planes& d_out, double* g,
                   std::vector<double>* d_extra, Planes* d_in) {
  const auto& k = kernels::active();
  const std::size_t f = in.first(), n = in.span();
  const std::ptrdiff_t wp = in.wp();
  for (int o = 0; o < cv.cout; ++o) {
    const double* dy_p = d_out.ptr(o);
    double bsum = 0.0;
    for (std::size_t q = f; q < f + n; ++q) bsum += dy_p[q];
    if (g) g[cv.b + o] += bsum;
    if (d_extra) (*d_extra)[o] += bsum;
    for (int c = 0; c < cv.cin; ++c) {
      const double* src = in.ptr(c);
      const std::size_t wi = cv.w + (static_cast<std::size_t>(o) * cv.cin + c) * 9;
      for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx) {
          const std::ptrdiff_t off = (dy - 1) * wp + (dx - 1);
          if (g) g[wi + dy * 3 + dx] += k.dot(n, dy_p + f, src + f + off);
          if (d_in) k.axpy(n, p[wi + dy * 3 + dx], dy_p + f, d_in->ptr(c) + f + off);
        }
    }
  }
  if (d_in) d_in->zero_border();
}

void linear_forward(const double* p, const Linear& l, const std::vector<double>& in, std::vector<double>& out) {
  out.assign(l.out, 0.0);
  for (int o = 0; o < l.out; ++o) {
    double s = p[l.b + o];
    for (int j = 0; j < l.in; ++j) s += p[l.w + static_cast<std::size_t>(o) * l.in + j] * in[j];
    out[o] = s;
  }
}

void linear_backward(const double* p, const Linear& l, const std::vector<double>& in, const std::vector<double>& d_out,
                     double* g, std::vector<double>& d_in) {
  for (int o = 0; o < l.out; ++o) {
    if (g) {
      g[l.b + o] += d_out[o];
      for (int j = 0; j < l.in; ++j) g[l.w + static_cast<std::size_t>(o) * l.in + j] += d_out[o] * in[j];
    }
    for (int j = 0; j < l.in; ++j) d_in[j] += p[l.w + static_cast<std::size_t>(o) * l.in + j] * d_out[o];
  }
}

void silu_planes(const Planes& z, Planes& h) {
  h = z;
  for (auto& v : h.data) v = silu(v);
}

// d_z = d_h * silu'(z), border stays zero because d_h has a zero border.
Planes silu_backward(const Planes& z, const Planes& d_h) {
  Planes d = d_h;
  for (std::size_t q = 0; q < d.data.size(); ++q) d.data[q] *= silu_grad(z.data[q]);
  return d;
}

}  // namespace

struct ScoreNet::Layout {
  Linear embed, a1, a2, a3, a4, gain;
  Conv c1, c2, c3, c4, c5;
  std::size_t total = 0;

  explicit Layout(const ScoreNetConfig& c) {
    auto lin = [&](int in, int out) {
      Linear l{total, total + static_cast<std::size_t>(in) * out, in, out};
      total += static_cast<std::size_t>(in) * out + out;
      return l;
    };
    auto conv = [&](int cin, int cout) {
      Conv v{total, total + static_cast<std::size_t>(cin) * cout * 9, cin, cout};
      total += static_cast<std::size_t>(cin) * cout * 9 + cout;
      return v;
    };
    const int C = c.channels, E = c.embed_dim;
    embed = lin(E, E);
    a1 = lin(E, C);
    a2 = lin(E, C);
    a3 = lin(E, C);
    a4 = lin(E, C);
    gain = lin(E, 1);
    c1 = conv(1, C);
    c2 = conv(C, C);
    c3 = conv(C, C);
    c4 = conv(2 * C, C);
    c5 = conv(C, 1);
  }
};

struct ScoreNet::Tape {
  std::vector<double> feat, e_pre, e, b1, b2, b3, b4, gain;
  Planes x, z1, h1, pool, z2, h2, z3, h3, cat, z4, h4, out;
};

void ScoreNetConfig::validate() const {
  if (nx < 2 || nz < 2 || nx % 2 || nz % 2) throw InvalidArgument("score net field dimensions must be even and >= 2");
  if (channels < 1 || channels > 32) throw InvalidArgument("score net channels must lie in 1..32");
  if (embed_dim < 2 || embed_dim % 2) throw InvalidArgument("score net embed_dim must be even");
}

ScoreNet::ScoreNet(ScoreNetConfig config, DiffusionSchedule schedule, std::uint64_t seed)
    : cfg_(config), sched_(std::move(schedule)) {
  cfg_.validate();
  const Layout L(cfg_);
  params_.assign(L.total, 0.0);
  Rng rng(seed, "init");
  auto fill = [&](std::size_t off, std::size_t n, double scale) {
    for (std::size_t j = 0; j < n; ++j) params_[off + j] = scale * (2.0 * rng.uniform() - 1.0);
  };
  auto init_lin = [&](const Linear& l, double gain) {
    fill(l.w, static_cast<std::size_t>(l.in) * l.out, gain * std::sqrt(3.0 / l.in));
  };
  auto init_conv = [&](const Conv& c, double gain) {
    fill(c.w, static_cast<std::size_t>(c.cin) * c.cout * 9, gain * std::sqrt(3.0 / (9.0 * c.cin)));
  };
  init_lin(L.embed, 1.0);
  for (const auto* l : {&L.a1, &L.a2, &L.a3, &L.a4}) init_lin(*l, 0.5);
  init_conv(L.c1, 1.0);
  init_conv(L.c2, 1.0);
  init_conv(L.c3, 1.0);
  init_conv(L.c4, 1.0);
  init_conv(L.c5, 0.1);
  round_to_float();
}

ScoreNet::ScoreNet(ScoreNetConfig config, DiffusionSchedule schedule, std::vector<double> params)
    : cfg_(config), sched_(std::move(schedule)), params_(std::move(params)) {
  cfg_.validate();
  if (params_.size() != Layout(cfg_).total) throw InvalidArgument("parameter count does not match network config");
}

void ScoreNet::round_to_float() {
  for (auto& p : params_) p = static_cast<double>(static_cast<float>(p));
}

void ScoreNet::check_input(const Field2D& x, int i) const {
  sched_.check_step(i);
  if (x.nx() != cfg_.nx || x.nz() != cfg_.nz) throw InvalidArgument("field shape does not match the score network");
}

void ScoreNet::forward(const Field2D& x, int i, Tape& t) const {
  const Layout L(cfg_);
  const double* p = params_.data();
  const int C = cfg_.channels, E = cfg_.embed_dim, H = cfg_.nx, W = cfg_.nz;

  t.feat.assign(E, 0.0);
  const int half = E / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    t.feat[k] = std::sin(i * freq);
    t.feat[half + k] = std::cos(i * freq);
  }
  linear_forward(p, L.embed, t.feat, t.e_pre);
  t.e = t.e_pre;
  for (auto& v : t.e) v = silu(v);
  linear_forward(p, L.a1, t.e, t.b1);
  linear_forward(p, L.a2, t.e, t.b2);
  linear_forward(p, L.a3, t.e, t.b3);
  linear_forward(p, L.a4, t.e, t.b4);
  linear_forward(p, L.gain, t.e, t.gain);

  t.x = Planes(1, H, W);
  for (int a = 0; a < H; ++a)
    for (int b = 0; b < W; ++b) t.x.at(0, a, b) = x(a, b);

  t.z1 = Planes(C, H, W);
  conv_forward(p, L.c1, t.x, t.b1, t.z1);
  silu_planes(t.z1, t.h1);

  t.pool = Planes(C, H / 2, W / 2);
  for (int c = 0; c < C; ++c)
    for (int a = 0; a < H / 2; ++a)
      for (int b = 0; b < W / 2; ++b)
        t.pool.at(c, a, b) = 0.25 * (t.h1.at(c, 2 * a, 2 * b) + t.h1.at(c, 2 * a + 1, 2 * b) +
                                     t.h1.at(c, 2 * a, 2 * b + 1) + t.h1.at(c, 2 * a + 1, 2 * b + 1));
  t.z2 = Planes(C, H / 2, W / 2);
  conv_forward(p, L.c2, t.pool, t.b2, t.z2);
  silu_planes(t.z2, t.h2);
  t.z3 = Planes(C, H / 2, W / 2);
  conv_forward(p, L.c3, t.h2, t.b3, t.z3);
  silu_planes(t.z3, t.h3);

  t.cat = Planes(2 * C, H, W);
  for (int c = 0; c < C; ++c)
    for (int a = 0; a < H; ++a)
      for (int b = 0; b < W; ++b) {
        t.cat.at(c, a, b) = t.h3.at(c, a / 2, b / 2);
        t.cat.at(C + c, a, b) = t.h1.at(c, a, b);
      }
  t.z4 = Planes(C, H, W);
  conv_forward(p, L.c4, t.cat, t.b4, t.z4);
  silu_planes(t.z4, t.h4);

  t.out = Planes(1, H, W);
  conv_forward(p, L.c5, t.h4, {}, t.out);
  for (int a = 0; a < H; ++a)
    for (int b = 0; b < W; ++b) t.out.at(0, a, b) += t.gain[0] * x(a, b);
}

void ScoreNet::backward(const Tape& t, const Field2D& d_eps, std::vector<double>* param_grad, Field2D* d_x) const {
  const Layout L(cfg_);
  const double* p = params_.data();
  double* g = param_grad ? param_grad->data() : nullptr;
  const int C = cfg_.channels, E = cfg_.embed_dim, H = cfg_.nx, W = cfg_.nz;

  Planes d_out(1, H, W);
  double d_gain = 0.0;
  for (int a = 0; a < H; ++a)
    for (int b = 0; b < W; ++b) {
      d_out.at(0, a, b) = d_eps(a, b);
      d_gain += d_eps(a, b) * t.x.at(0, a, b);
    }

  std::vector<double> d_e(E, 0.0);
  std::vector<double> d_b(C, 0.0);
  auto bias_back = [&](const Linear& l) {
    linear_backward(p, l, t.e, d_b, g, d_e);
    std::ranges::fill(d_b, 0.0);
  };

  Planes d_h4(C, H, W);
  conv_backward(p, L.c5, t.h4, d_out, g, nullptr, &d_h4);
  const Planes d_z4 = silu_backward(t.z4, d_h4);
  Planes d_cat(2 * C, H, W);
  conv_backward(p, L.c4, t.cat, d_z4, g, &d_b, &d_cat);
  bias_back(L.a4);

  Planes d_h3(C, H / 2, W / 2), d_h1(C, H, W);
  for (int c = 0; c < C; ++c)
    for (int a = 0; a < H; ++a)
      for (int b = 0; b < W; ++b) {
        d_h3.at(c, a / 2, b / 2) += d_cat.at(c, a, b);
        d_h1.at(c, a, b) = d_cat.at(C + c, a, b);
      }
  const Planes d_z3 = silu_backward(t.z3, d_h3);
  Planes d_h2(C, H / 2, W / 2);
  conv_backward(p, L.c3, t.h2, d_z3, g, &d_b, &d_h2);
  bias_back(L.a3);
  const Planes d_z2 = silu_backward(t.z2, d_h2);
  Planes d_pool(C, H / 2, W / 2);
  conv_backward(p, L.c2, t.pool, d_z2, g, &d_b, &d_pool);
  bias_back(L.a2);
  for (int c = 0; c < C; ++c)
    for (int a = 0; a < H; ++a)
      for (int b = 0; b < W; ++b) d_h1.at(c, a, b) += 0.25 * d_pool.at(c, a / 2, b / 2);
  const Planes d_z1 = silu_backward(t.z1, d_h1);
  Planes d_xp(1, H, W);
  conv_backward(p, L.c1, t.x, d_z1, g, &d_b, d_x ? &d_xp : nullptr);
  bias_back(L.a1);

  std::vector<double> dg{d_gain};
  linear_backward(p, L.gain, t.e, dg, g, d_e);
  if (g) {
    std::vector<double> d_pre(E);
    for (int k = 0; k < E; ++k) d_pre[k] = d_e[k] * silu_grad(t.e_pre[k]);
    std::vector<double> sink(E, 0.0);
    linear_backward(p, L.embed, t.feat, d_pre, g, sink);
  }
  if (d_x) {
    *d_x = Field2D(H, W, 0.0);
    for (int a = 0; a < H; ++a)
      for (int b = 0; b < W; ++b) (*d_x)(a, b) = d_xp.at(0, a, b) + t.gain[0] * d_eps(a, b);
  }
}

Field2D ScoreNet::eps(const Field2D& x, int i) const {
  check_input(x, i);
  Tape t;
  forward(x, i, t);
  Field2D out(cfg_.nx, cfg_.nz);
  for (int a = 0; a < cfg_.nx; ++a)
    for (int b = 0; b < cfg_.nz; ++b) out(a, b) = t.out.at(0, a, b);
  return out;
}

Field2D ScoreNet::score(const Field2D& x, int i) const {
  Field2D e = eps(x, i);
  e *= -1.0 / std::sqrt(1.0 - sched_.alpha_bar(i));
  return e;
}

Field2D ScoreNet::vjp(const Field2D& x, int i, const Field2D& c) const {
  check_input(x, i);
  if (!c.same_shape(x)) throw InvalidArgument("cotangent shape mismatch");
  Tape t;
  forward(x, i, t);
  Field2D d_x;
  backward(t, (-1.0 / std::sqrt(1.0 - sched_.alpha_bar(i))) * c, nullptr, &d_x);
  return d_x;
}

Field2D ScoreNet::eps_and_backward(const Field2D& x, int i, const std::function<Field2D(const Field2D&)>& eps_grad,
                                   std::vector<double>& param_grad) const {
  check_input(x, i);
  if (param_grad.size() != params_.size()) param_grad.assign(params_.size(), 0.0);
  Tape t;
  forward(x, i, t);
  Field2D out(cfg_.nx, cfg_.nz);
  for (int a = 0; a < cfg_.nx; ++a)
    for (int b = 0; b < cfg_.nz; ++b) out(a, b) = t.out.at(0, a, b);
  backward(t, eps_grad(out), &param_grad, nullptr);
  return out;
}

TrainResult dsm_train(const std::vector<Field2D>& samples, const DiffusionSchedule& schedule,
                      const ScoreNetConfig& net_config, const TrainConfig& tc) {
  if (samples.size() < 2) throw InvalidArgument("training needs at least two samples");
  for (const auto& s : samples)
    if (s.nx() != net_config.nx || s.nz() != net_config.nz) throw InvalidArgument("sample shape mismatch");
  if (tc.epochs < 1 || tc.batch < 1 || !(tc.learning_rate > 0.0)) throw InvalidArgument("invalid training config");

  TrainResult res{ScoreNet(net_config, schedule, tc.seed), {}};
  auto& net = res.net;
  const std::size_t np = net.param_count();
  std::vector<double> grad(np), m(np, 0.0), v(np, 0.0);
  constexpr double b1 = 0.9, b2 = 0.999, eps_adam = 1e-8;
  Rng rng(tc.seed, "train");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  const double npix = static_cast<double>(net_config.nx) * net_config.nz;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      const std::size_t end = std::min(order.size(), start + tc.batch);
      const double bsz = static_cast<double>(end - start);
      std::ranges::fill(grad, 0.0);
      for (std::size_t s = start; s < end; ++s) {
        const Field2D& x0 = samples[order[s]];
        const int i = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(schedule.N)));
        const Field2D z = rng.normal_field(x0.nx(), x0.nz());
        const Field2D x = forward_noising_with(x0, i, schedule, z);
        double loss = 0.0;
        net.eps_and_backward(
            x, i,
            [&](const Field2D& e) {
              loss = eps_loss(e, z);
              Field2D d = e - z;
              d *= 2.0 / (npix * bsz);
              return d;
            },
            grad);
        if (!std::isfinite(loss)) throw TrainingError("training loss is not finite (epoch " + std::to_string(epoch) + ")");
        epoch_loss += loss;
      }
      ++step;
      const double c1 = 1.0 - std::pow(b1, step), c2 = 1.0 - std::pow(b2, step);
      auto& p = net.params();
      for (std::size_t j = 0; j < np; ++j) {
        m[j] = b1 * m[j] + (1.0 - b1) * grad[j];
        v[j] = b2 * v[j] + (1.0 - b2) * grad[j] * grad[j];
        p[j] -= tc.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_adam);
      }
    }
    res.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  net.round_to_float();
  return res;
}

}  // namespace otfwi
