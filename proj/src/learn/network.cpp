#include "dgpmp/learn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dgpmp::learn {

namespace {

constexpr double kNormEps = 1e-5;
constexpr int kChannels = 3;

int conv_out_size(int in, int stride) { return (in - 1) / stride + 1; }

std::size_t volume(const std::vector<int>& shape) {
  std::size_t v = 1;
  for (int d : shape) v *= static_cast<std::size_t>(d);
  return v;
}

}  // namespace

NetworkSpec NetworkSpec::desk() { return NetworkSpec{}; }

NetworkSpec NetworkSpec::full() {
  NetworkSpec s;
  s.image_size = 128;
  s.n_states = 100;
  s.conv_filters = {16, 16, 16, 32, 32};
  s.fc_hidden = {1000, 640};
  return s;
}

void NetworkSpec::validate() const {
  if (image_size < 1) throw InvalidArgument("image_size must be >= 1");
  if (n_states < 2) throw InvalidArgument("n_states must be >= 2");
  if (conv_stride < 1) throw InvalidArgument("conv_stride must be >= 1");
  for (int f : conv_filters)
    if (f < 1) throw InvalidArgument("conv filter counts must be >= 1");
  for (int h : fc_hidden)
    if (h < 1) throw InvalidArgument("fc hidden sizes must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must be in [0, 1)");
  if (!(log_sigma_min < log_sigma_max)) throw InvalidArgument("empty log-sigma range");
}

int NetworkSpec::feature_size() const {
  int s = image_size;
  for (std::size_t k = 0; k < conv_filters.size(); ++k) s = conv_out_size(s, conv_stride);
  return s;
}

int NetworkSpec::fc_input_size() const {
  const int channels = conv_filters.empty() ? kChannels : conv_filters.back();
  const int f = feature_size();
  return channels * f * f + kStateDim * n_states;
}

EnvImages EnvImages::from_sdf(const Sdf& sdf, int size) {
  const OccupancyGrid& g = sdf.grid();
  EnvImages img;
  img.size = size;
  const double extent_x = g.resolution() * g.width();
  img.pixel = extent_x / size;
  // Pixel centers tile the same footprint as the grid cells.
  img.origin = g.origin() - 0.5 * g.resolution() * Vec2::Ones() + 0.5 * img.pixel * Vec2::Ones();
  img.occupancy.resize(static_cast<std::size_t>(size) * size);
  img.sdf.resize(img.occupancy.size());
  for (int iy = 0; iy < size; ++iy) {
    for (int ix = 0; ix < size; ++ix) {
      const Vec2 c = img.origin + img.pixel * Vec2(ix, iy);
      const int gx = std::clamp(static_cast<int>(std::lround((c.x() - g.origin().x()) / g.resolution())),
                                0, g.width() - 1);
      const int gy = std::clamp(static_cast<int>(std::lround((c.y() - g.origin().y()) / g.resolution())),
                                0, g.height() - 1);
      img.occupancy[iy * size + ix] = g.occupied(gx, gy) ? 1.0 : 0.0;
      img.sdf[iy * size + ix] = sdf.at(gx, gy);
    }
  }
  return img;
}

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  auto add = [&](std::string name, std::vector<int> shape, double stddev, double fill) {
    Tensor t{std::move(name), std::move(shape), {}};
    t.data.resize(volume(t.shape));
    if (stddev > 0.0) {
      std::normal_distribution<double> dist(0.0, stddev);
      for (auto& v : t.data) v = dist(rng);
    } else {
      std::fill(t.data.begin(), t.data.end(), fill);
    }
    params_.push_back(std::move(t));
  };

  int in_c = kChannels;
  for (std::size_t k = 0; k < spec_.conv_filters.size(); ++k) {
    const int out_c = spec_.conv_filters[k];
    const std::string p = "conv" + std::to_string(k);
    add(p + ".weight", {out_c, in_c, 3, 3}, std::sqrt(2.0 / (9.0 * in_c)), 0.0);
    add(p + ".bias", {out_c}, 0.0, 0.0);
    if (spec_.normalization) {
      add(p + ".gamma", {out_c}, 0.0, 1.0);
      add(p + ".beta", {out_c}, 0.0, 0.0);
      buffers_.push_back({p + ".running_mean", {out_c}, std::vector<double>(out_c, 0.0)});
      buffers_.push_back({p + ".running_var", {out_c}, std::vector<double>(out_c, 1.0)});
    }
    in_c = out_c;
  }
  int in_f = spec_.fc_input_size();
  for (std::size_t k = 0; k < spec_.fc_hidden.size(); ++k) {
    const int out_f = spec_.fc_hidden[k];
    const std::string p = "fc" + std::to_string(k);
    add(p + ".weight", {out_f, in_f}, std::sqrt(2.0 / in_f), 0.0);
    add(p + ".bias", {out_f}, 0.0, 0.0);
    in_f = out_f;
  }
  add("out.weight", {spec_.n_states, in_f}, 0.1 / std::sqrt(static_cast<double>(in_f)), 0.0);
  add("out.bias", {spec_.n_states}, 0.0, spec_.output_bias_init);
  check_layout();
}

Network::Network(NetworkSpec spec, std::vector<Tensor> params, std::vector<Tensor> buffers)
    : spec_(std::move(spec)), params_(std::move(params)), buffers_(std::move(buffers)) {
  spec_.validate();
  check_layout();
}

void Network::check_layout() const {
  std::vector<std::pair<std::string, std::vector<int>>> expect;
  int in_c = kChannels;
  for (std::size_t k = 0; k < spec_.conv_filters.size(); ++k) {
    const int out_c = spec_.conv_filters[k];
    const std::string p = "conv" + std::to_string(k);
    expect.push_back({p + ".weight", {out_c, in_c, 3, 3}});
    expect.push_back({p + ".bias", {out_c}});
    if (spec_.normalization) {
      expect.push_back({p + ".gamma", {out_c}});
      expect.push_back({p + ".beta", {out_c}});
    }
    in_c = out_c;
  }
  int in_f = spec_.fc_input_size();
  for (std::size_t k = 0; k < spec_.fc_hidden.size(); ++k) {
    const std::string p = "fc" + std::to_string(k);
    expect.push_back({p + ".weight", {spec_.fc_hidden[k], in_f}});
    expect.push_back({p + ".bias", {spec_.fc_hidden[k]}});
    in_f = spec_.fc_hidden[k];
  }
  expect.push_back({"out.weight", {spec_.n_states, in_f}});
  expect.push_back({"out.bias", {spec_.n_states}});
  if (expect.size() != params_.size())
    throw InvalidArgument("parameter count does not match the network spec");
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (params_[i].name != expect[i].first || params_[i].shape != expect[i].second ||
        params_[i].data.size() != volume(expect[i].second))
      throw InvalidArgument("parameter '" + params_[i].name + "' does not match the spec");
  }
  const std::size_t want_buffers = spec_.normalization ? 2 * spec_.conv_filters.size() : 0;
  if (buffers_.size() != want_buffers)
    throw InvalidArgument("normalization buffers do not match the spec");
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.data.size();
  return n;
}

const Tensor& Network::param(const std::string& name) const {
  for (const auto& t : params_)
    if (t.name == name) return t;
  throw InvalidArgument("no parameter named '" + name + "'");
}

Tensor& Network::param(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const Network&>(*this).param(name));
}

std::vector<Tensor> Network::zero_gradients() const {
  std::vector<Tensor> g = params_;
  for (auto& t : g) std::fill(t.data.begin(), t.data.end(), 0.0);
  return g;
}

void Network::update_running_stats(const std::vector<const ForwardCache*>& calls,
                                   double momentum) {
  if (!spec_.normalization || calls.empty()) return;
  for (std::size_t k = 0; k < spec_.conv_filters.size(); ++k) {
    auto& rm = buffers_[2 * k].data;
    auto& rv = buffers_[2 * k + 1].data;
    for (std::size_t c = 0; c < rm.size(); ++c) {
      double m = 0.0, v = 0.0;
      for (const auto* call : calls) {
        m += call->norm_mean[k][c];
        v += call->norm_var[k][c];
      }
      m /= calls.size();
      v /= calls.size();
      rm[c] = (1.0 - momentum) * rm[c] + momentum * m;
      rv[c] = (1.0 - momentum) * rv[c] + momentum * v;
    }
  }
}

namespace {

// Parameter tensors are laid out per layer in construction order.
struct Offsets {
  std::vector<int> conv;  // index of convK.weight
  std::vector<int> fc;    // index of fcK.weight
  int out;
};

Offsets offsets(const NetworkSpec& spec) {
  Offsets o;
  int idx = 0;
  for (std::size_t k = 0; k < spec.conv_filters.size(); ++k) {
    o.conv.push_back(idx);
    idx += spec.normalization ? 4 : 2;
  }
  for (std::size_t k = 0; k < spec.fc_hidden.size(); ++k) {
    o.fc.push_back(idx);
    idx += 2;
  }
  o.out = idx;
  return o;
}

void conv_forward(const std::vector<double>& in, int in_c, int in_s, const std::vector<double>& w,
                  const std::vector<double>& b, int out_c, int stride, std::vector<double>& out) {
  const int out_s = conv_out_size(in_s, stride);
  out.assign(static_cast<std::size_t>(out_c) * out_s * out_s, 0.0);
  for (int o = 0; o < out_c; ++o) {
    double* dst = &out[static_cast<std::size_t>(o) * out_s * out_s];
    for (int i = 0; i < out_s * out_s; ++i) dst[i] = b[o];
    for (int c = 0; c < in_c; ++c) {
      const double* src = &in[static_cast<std::size_t>(c) * in_s * in_s];
      const double* k = &w[(static_cast<std::size_t>(o) * in_c + c) * 9];
      for (int y = 0; y < out_s; ++y) {
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y * stride + ky - 1;
          if (iy < 0 || iy >= in_s) continue;
          for (int x = 0; x < out_s; ++x) {
            double acc = 0.0;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = x * stride + kx - 1;
              if (ix < 0 || ix >= in_s) continue;
              acc += k[ky * 3 + kx] * src[iy * in_s + ix];
            }
            dst[y * out_s + x] += acc;
          }
        }
      }
    }
  }
}

// Accumulates dw, db and (for input channels in [din_lo, in_c)) din.
void conv_backward(const std::vector<double>& in, int in_c, int in_s, const std::vector<double>& w,
                   int out_c, int stride, const std::vector<double>& dout, std::vector<double>& dw,
                   std::vector<double>& db, std::vector<double>* din, int din_lo) {
  const int out_s = conv_out_size(in_s, stride);
  if (din) din->assign(static_cast<std::size_t>(in_c) * in_s * in_s, 0.0);
  for (int o = 0; o < out_c; ++o) {
    const double* g = &dout[static_cast<std::size_t>(o) * out_s * out_s];
    double bsum = 0.0;
    for (int i = 0; i < out_s * out_s; ++i) bsum += g[i];
    db[o] += bsum;
    for (int c = 0; c < in_c; ++c) {
      const double* src = &in[static_cast<std::size_t>(c) * in_s * in_s];
      const std::size_t kofs = (static_cast<std::size_t>(o) * in_c + c) * 9;
      const double* k = &w[kofs];
      double* dk = &dw[kofs];
      double* dsrc = (din && c >= din_lo) ? &(*din)[static_cast<std::size_t>(c) * in_s * in_s]
                                          : nullptr;
      for (int y = 0; y < out_s; ++y) {
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y * stride + ky - 1;
          if (iy < 0 || iy >= in_s) continue;
          for (int x = 0; x < out_s; ++x) {
            const double gv = g[y * out_s + x];
            if (gv == 0.0) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = x * stride + kx - 1;
              if (ix < 0 || ix >= in_s) continue;
              dk[ky * 3 + kx] += gv * src[iy * in_s + ix];
              if (dsrc) dsrc[iy * in_s + ix] += gv * k[ky * 3 + kx];
            }
          }
        }
      }
    }
  }
}

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Weights are stored row-major as [out, in].
Eigen::Map<const RowMajorMatrix> as_matrix(const Tensor& t) {
  return {t.data.data(), t.shape[0], t.shape[1]};
}

}  // namespace

LearnedParams forward_w(const Network& net, const EnvImages& images, const Trajectory& traj,
                        const ForwardMode& mode, ForwardCache* cache) {
  const NetworkSpec& spec = net.spec();
  const int s = spec.image_size;
  if (images.size != s) throw InvalidArgument("image size does not match the network spec");
  if (traj.size() != spec.n_states)
    throw InvalidArgument("trajectory length does not match the network spec");
  const auto& params = net.params();
  const Offsets off = offsets(spec);

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc = ForwardCache{};
  fc.training = mode.training;

  const std::size_t plane = static_cast<std::size_t>(s) * s;
  fc.input.assign(kChannels * plane, 0.0);
  for (std::size_t i = 0; i < plane; ++i) {
    fc.input[i] = images.occupancy[i];
    fc.input[plane + i] = spec.sdf_scale * images.sdf[i];
  }
  // Bilinear splat of every support state onto the trajectory channel.
  const int n = traj.size();
  fc.traj_pixels.resize(4 * n);
  fc.traj_weights.resize(4 * n);
  fc.traj_weight_grads.resize(n);
  for (int i = 0; i < n; ++i) {
    const Vec2 g = (traj.position(i) - images.origin) / images.pixel;
    double gx = g.x(), gy = g.y();
    const bool cx = gx < 0.0 || gx > s - 1, cy = gy < 0.0 || gy > s - 1;
    gx = std::clamp(gx, 0.0, static_cast<double>(s - 1));
    gy = std::clamp(gy, 0.0, static_cast<double>(s - 1));
    const int x0 = s > 1 ? std::min(static_cast<int>(std::floor(gx)), s - 2) : 0;
    const int y0 = s > 1 ? std::min(static_cast<int>(std::floor(gy)), s - 2) : 0;
    const int x1 = std::min(x0 + 1, s - 1), y1 = std::min(y0 + 1, s - 1);
    const double fx = gx - x0, fy = gy - y0;
    const int pix[4] = {y0 * s + x0, y0 * s + x1, y1 * s + x0, y1 * s + x1};
    const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    Eigen::Matrix<double, 4, 2> dw;
    dw << -(1 - fy), -(1 - fx), (1 - fy), -fx, -fy, (1 - fx), fy, fx;
    dw /= images.pixel;
    if (cx) dw.col(0).setZero();
    if (cy) dw.col(1).setZero();
    for (int k = 0; k < 4; ++k) {
      fc.traj_pixels[4 * i + k] = pix[k];
      fc.traj_weights[4 * i + k] = wts[k];
      fc.input[2 * plane + pix[k]] += wts[k];
    }
    fc.traj_weight_grads[i] = dw;
  }

  std::vector<double> x = fc.input;
  int in_c = kChannels, in_s = s;
  for (std::size_t k = 0; k < spec.conv_filters.size(); ++k) {
    const int out_c = spec.conv_filters[k];
    const int base = off.conv[k];
    fc.conv_in.push_back(x);
    std::vector<double> z;
    conv_forward(x, in_c, in_s, params[base].data, params[base + 1].data, out_c,
                 spec.conv_stride, z);
    const int out_s = conv_out_size(in_s, spec.conv_stride);
    const std::size_t m = static_cast<std::size_t>(out_s) * out_s;
    fc.conv_pre.push_back(z);
    std::vector<double> y = z;
    if (spec.normalization) {
      const auto& gamma = params[base + 2].data;
      const auto& beta = params[base + 3].data;
      std::vector<double> mean(out_c), var(out_c), inv_std(out_c), hat(z.size());
      for (int c = 0; c < out_c; ++c) {
        const double* zc = &z[c * m];
        if (mode.training) {
          double mu = 0.0;
          for (std::size_t i = 0; i < m; ++i) mu += zc[i];
          mu /= m;
          double v = 0.0;
          for (std::size_t i = 0; i < m; ++i) v += (zc[i] - mu) * (zc[i] - mu);
          v /= m;
          mean[c] = mu;
          var[c] = v;
        } else {
          mean[c] = net.buffers()[2 * k].data[c];
          var[c] = net.buffers()[2 * k + 1].data[c];
        }
        inv_std[c] = 1.0 / std::sqrt(var[c] + kNormEps);
        for (std::size_t i = 0; i < m; ++i) {
          hat[c * m + i] = (zc[i] - mean[c]) * inv_std[c];
          y[c * m + i] = gamma[c] * hat[c * m + i] + beta[c];
        }
      }
      fc.norm_hat.push_back(std::move(hat));
      fc.norm_inv_std.push_back(std::move(inv_std));
      fc.norm_mean.push_back(std::move(mean));
      fc.norm_var.push_back(std::move(var));
    }
    for (auto& v : y) v = std::max(v, 0.0);
    fc.conv_out.push_back(y);
    x = std::move(y);
    in_c = out_c;
    in_s = out_s;
  }

  Eigen::VectorXd h(spec.fc_input_size());
  std::copy(x.begin(), x.end(), h.data());
  h.tail(kStateDim * n) = spec.traj_scale * traj.flat();

  std::mt19937_64 drop_rng(mode.dropout_seed);
  const double keep = 1.0 - spec.dropout;
  for (std::size_t k = 0; k < spec.fc_hidden.size(); ++k) {
    const int base = off.fc[k];
    fc.fc_in.push_back(h);
    const auto w = as_matrix(params[base]);
    const Eigen::Map<const Eigen::VectorXd> b(params[base + 1].data.data(),
                                              params[base + 1].data.size());
    Eigen::VectorXd pre = w * h + b;
    fc.fc_pre.push_back(pre);
    Eigen::VectorXd act = pre.cwiseMax(0.0);
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(act.size());
    if (mode.training && spec.dropout > 0.0) {
      std::bernoulli_distribution bern(keep);
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask[i] = bern(drop_rng) ? 1.0 / keep : 0.0;
      act = act.cwiseProduct(mask);
    }
    fc.dropout_mask.push_back(std::move(mask));
    h = std::move(act);
  }
  fc.fc_in.push_back(h);
  const auto w_out = as_matrix(params[off.out]);
  const Eigen::Map<const Eigen::VectorXd> b_out(params[off.out + 1].data.data(),
                                                params[off.out + 1].data.size());
  fc.raw_out = w_out * h + b_out;
  fc.log_sigma = fc.raw_out.cwiseMax(spec.log_sigma_min).cwiseMin(spec.log_sigma_max);
  return LearnedParams{fc.log_sigma.array().exp().matrix()};
}

Eigen::VectorXd backward_w(const Network& net, const ForwardCache& fc,
                           const Eigen::VectorXd& d_log_sigma, std::vector<Tensor>& grads) {
  const NetworkSpec& spec = net.spec();
  const auto& params = net.params();
  const Offsets off = offsets(spec);
  const int n = spec.n_states;
  if (d_log_sigma.size() != n) throw InvalidArgument("d_log_sigma has the wrong length");

  Eigen::VectorXd d_raw = d_log_sigma;
  for (int i = 0; i < n; ++i)
    if (fc.raw_out[i] < spec.log_sigma_min || fc.raw_out[i] > spec.log_sigma_max) d_raw[i] = 0.0;

  auto accumulate_linear = [&](int base, const Eigen::VectorXd& in, const Eigen::VectorXd& d_pre) {
    Tensor& gw = grads[base];
    const int rows = gw.shape[0], cols = gw.shape[1];
    for (int r = 0; r < rows; ++r) {
      if (d_pre[r] == 0.0) continue;
      double* row = &gw.data[static_cast<std::size_t>(r) * cols];
      for (int c = 0; c < cols; ++c) row[c] += d_pre[r] * in[c];
    }
    for (int r = 0; r < rows; ++r) grads[base + 1].data[r] += d_pre[r];
    return Eigen::VectorXd(as_matrix(params[base]).transpose() * d_pre);
  };

  Eigen::VectorXd dh = accumulate_linear(off.out, fc.fc_in.back(), d_raw);
  for (int k = static_cast<int>(spec.fc_hidden.size()) - 1; k >= 0; --k) {
    Eigen::VectorXd d_pre = dh.cwiseProduct(fc.dropout_mask[k]);
    for (Eigen::Index i = 0; i < d_pre.size(); ++i)
      if (fc.fc_pre[k][i] <= 0.0) d_pre[i] = 0.0;
    dh = accumulate_linear(off.fc[k], fc.fc_in[k], d_pre);
  }

  Eigen::VectorXd d_traj = spec.traj_scale * dh.tail(kStateDim * n);
  const int s = spec.image_size;
  const std::size_t plane = static_cast<std::size_t>(s) * s;

  std::vector<double> d_img;  // adjoint of the trajectory channel
  if (spec.conv_filters.empty()) {
    d_img.assign(dh.data() + 2 * plane, dh.data() + 3 * plane);
  } else {
    std::vector<double> dx(dh.data(), dh.data() + (dh.size() - kStateDim * n));
    const int layers = static_cast<int>(spec.conv_filters.size());
    std::vector<int> sizes{s};
    for (int k = 0; k < layers; ++k) sizes.push_back(conv_out_size(sizes.back(), spec.conv_stride));
    for (int k = layers - 1; k >= 0; --k) {
      const int out_c = spec.conv_filters[k];
      const int in_c = k == 0 ? kChannels : spec.conv_filters[k - 1];
      const std::size_t m = static_cast<std::size_t>(sizes[k + 1]) * sizes[k + 1];
      const int base = off.conv[k];
      std::vector<double> dz(dx.size());
      for (std::size_t i = 0; i < dx.size(); ++i) dz[i] = fc.conv_out[k][i] > 0.0 ? dx[i] : 0.0;
      if (spec.normalization) {
        const auto& gamma = params[base + 2].data;
        const auto& hat = fc.norm_hat[k];
        for (int c = 0; c < out_c; ++c) {
          double sum_dy = 0.0, sum_dy_hat = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            sum_dy += dz[c * m + i];
            sum_dy_hat += dz[c * m + i] * hat[c * m + i];
          }
          grads[base + 2].data[c] += sum_dy_hat;
          grads[base + 3].data[c] += sum_dy;
          const double inv_std = fc.norm_inv_std[k][c];
          const double g = gamma[c];
          for (std::size_t i = 0; i < m; ++i) {
            const double dhat = dz[c * m + i] * g;
            if (fc.training) {
              // Per-call statistics depend on every activation of the channel.
              dz[c * m + i] = inv_std / m *
                              (m * dhat - g * sum_dy - hat[c * m + i] * g * sum_dy_hat);
            } else {
              dz[c * m + i] = dhat * inv_std;
            }
          }
        }
      }
      std::vector<double> din;
      conv_backward(fc.conv_in[k], in_c, sizes[k], params[base].data, out_c, spec.conv_stride, dz,
                    grads[base].data, grads[base + 1].data, &din, k == 0 ? 2 : 0);
      dx = std::move(din);
    }
    d_img.assign(dx.begin() + 2 * plane, dx.begin() + 3 * plane);
  }

  for (int i = 0; i < n; ++i) {
    Vec2 dp = Vec2::Zero();
    for (int k = 0; k < 4; ++k)
      dp += d_img[fc.traj_pixels[4 * i + k]] * fc.traj_weight_grads[i].row(k).transpose();
    d_traj.segment<2>(kStateDim * i) += dp;
  }
  return d_traj;
}

}  // namespace dgpmp::learn
