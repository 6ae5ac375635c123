#pragma once

#include "dgpmp/core.hpp"
#include "dgpmp/env.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dgpmp::learn {

/// Shape of the covariance network: stride-2 3x3 convolutions over a
/// three-channel image (occupancy, signed distance, rasterized trajectory),
/// then fully connected layers that also see the flattened trajectory.
struct NetworkSpec {
  int image_size = 64;
  int n_states = 50;
  std::vector<int> conv_filters{8, 8, 16, 16};
  std::vector<int> fc_hidden{256, 128};
  int conv_stride = 2;
  bool normalization = true;  // per-channel normalization after each conv
  double dropout = 0.5;       // fully connected layers only
  double traj_scale = 0.1;    // multiplies the flattened trajectory input
  double sdf_scale = 0.5;     // multiplies the SDF channel
  double log_sigma_min = -13.815510557964274;  // log(1e-6)
  double log_sigma_max = 6.907755278982137;    // log(1e3)
  double output_bias_init = -2.995732273553991;  // log(0.05)

  static NetworkSpec desk();
  static NetworkSpec full();
  void validate() const;
  /// Spatial size after the convolution stack.
  int feature_size() const;
  int fc_input_size() const;
};

struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

/// Static image channels of one environment plus the world-to-pixel map.
struct EnvImages {
  int size = 0;
  Vec2 origin = Vec2::Zero();  // world position of pixel (0, 0) center
  double pixel = 1.0;          // meters per pixel
  std::vector<double> occupancy;
  std::vector<double> sdf;

  /// Nearest-cell resampling of the grid and field onto size x size pixels.
  static EnvImages from_sdf(const Sdf& sdf, int size);
};

struct ForwardMode {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

/// Activations of one forward call needed by backward().
struct ForwardCache {
  std::vector<double> input;                 // 3 x S x S
  std::vector<std::vector<double>> conv_in;  // input of each conv layer
  std::vector<std::vector<double>> conv_pre; // conv output before normalization
  std::vector<std::vector<double>> norm_hat; // normalized activations
  std::vector<std::vector<double>> norm_inv_std;
  std::vector<std::vector<double>> norm_mean;
  std::vector<std::vector<double>> norm_var;
  std::vector<std::vector<double>> conv_out;  // after ReLU
  std::vector<Eigen::VectorXd> fc_in;
  std::vector<Eigen::VectorXd> fc_pre;
  std::vector<Eigen::VectorXd> dropout_mask;  // scaled keep mask
  Eigen::VectorXd raw_out;
  Eigen::VectorXd log_sigma;
  std::vector<int> traj_pixels;               // 4 pixel indices per state
  std::vector<double> traj_weights;           // 4 bilinear weights per state
  std::vector<Eigen::Matrix<double, 4, 2>> traj_weight_grads;
  bool training = false;
};

class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t seed);
  Network(NetworkSpec spec, std::vector<Tensor> params, std::vector<Tensor> buffers);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& buffers() const { return buffers_; }
  std::vector<Tensor>& buffers() { return buffers_; }
  std::size_t parameter_count() const;

  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);

  /// Zero-initialized tensors shaped like params().
  std::vector<Tensor> zero_gradients() const;

  /// Blends per-call normalization statistics into the running buffers.
  void update_running_stats(const std::vector<const ForwardCache*>& calls, double momentum);

 private:
  void check_layout() const;

  NetworkSpec spec_;
  std::vector<Tensor> params_;
  std::vector<Tensor> buffers_;
};

/// Per-state sigma = exp(clamp(network output)). Throws InvalidArgument on
/// image or trajectory size mismatch.
LearnedParams forward_w(const Network& net, const EnvImages& images, const Trajectory& traj,
                        const ForwardMode& mode = {}, ForwardCache* cache = nullptr);

/// Accumulates parameter gradients for the given d loss / d log sigma and
/// returns d loss / d flat trajectory.
Eigen::VectorXd backward_w(const Network& net, const ForwardCache& cache,
                           const Eigen::VectorXd& d_log_sigma, std::vector<Tensor>& grads);

}  // namespace dgpmp::learn
