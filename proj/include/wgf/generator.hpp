#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "wgf/distributions.hpp"
#include "wgf/rng.hpp"
#include "wgf/types.hpp"
#include "wgf/velocity.hpp"

namespace wgf::gen {

enum class Activation { SiLU, Tanh };

struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

/// Fully connected network. The activation sits between layers, never after
/// the last. Residual mode adds the raw data input to the output (data input
/// width must equal the output width). Conditioning appends a one-hot class
/// block to the input; guidance_input appends the scalar w.
struct GeneratorParams {
    std::vector<Layer> layers;
    Activation activation = Activation::SiLU;
    bool residual = false;
    int num_classes = 0;      // 0 = unconditional
    bool guidance_input = false;

    int net_input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
    int data_input_dim() const { return net_input_dim() - num_classes - (guidance_input ? 1 : 0); }
    int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

    void validate() const;
};

/// Randomly initialized MLP; hidden holds the hidden widths. zero_init_last
/// zeroes the final layer so a residual network starts at the identity.
GeneratorParams make_mlp(int data_in, int out, const std::vector<int>& hidden, Activation activation,
                         bool residual, int num_classes, bool guidance_input, bool zero_init_last,
                         Rng& rng);

struct ForwardCache {
    Matrix net_input;              // N x net_in (after concatenation)
    std::vector<Matrix> pre;       // pre-activations per layer
    std::vector<Matrix> post;      // activations per layer (post.back() unused)
};

/// inputs holds raw data coordinates (N x data_in); labels/w are appended
/// internally when the network is conditional.
Matrix forward(const GeneratorParams& params, const Matrix& inputs,
               const std::optional<IntVector>& labels = std::nullopt,
               std::optional<double> w = std::nullopt, ForwardCache* cache = nullptr);

/// Exact reverse-mode gradients of a scalar loss with upstream dL/doutput.
std::vector<Layer> backward(const GeneratorParams& params, const ForwardCache& cache,
                            const Matrix& upstream);

double global_gradient_norm(const std::vector<Layer>& grads);

struct AdamState {
    std::vector<Layer> first_moment;
    std::vector<Layer> second_moment;
    long step = 0;

    static AdamState zeros_like(const GeneratorParams& params);
};

struct TrainConfig {
    int batch_n = 256;
    int batch_m = 256;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.0;
    double grad_clip = 5.0;
    double ema_decay = 0.999;
    int steps = 2000;
    vel::VelocityFieldSpec velocity;
    double step_size = 1.0;  // eta
    std::uint64_t seed = 0;

    std::vector<int> hidden = {256, 256, 256, 256};
    Activation activation = Activation::SiLU;
    bool residual = false;
    bool zero_init_last = false;

    bool conditional = false;          // one-hot class conditioning
    int uncond_batch = 16;             // unconditional targets per step under guidance
    bool sample_guidance_scale = false;  // w ~ (w+1)^-w_exponent on [0, w_max]
    double w_max = 3.0;
    double w_exponent = 3.0;

    // Optional affine feature lift phi(x) = A x + b applied before the velocity.
    std::optional<Matrix> feature_map_a;
    std::optional<Vector> feature_map_b;

    bool eval_ema = true;

    void validate() const;
};

struct Samplers {
    dist::DistributionSpec p_ref;
    dist::DistributionSpec target;
    std::optional<dist::DistributionSpec> target_uncond;
};

struct TrainStreams {
    Rng z, z_second, target, uncond, w, labels;

    static TrainStreams from_seed(std::uint64_t seed);
};

struct StepResult {
    double loss = 0.0;
    double grad_norm = 0.0;
    double w_used = 0.0;
};

/// One Alg.-1 step: draw z/z'/targets, push through the generator (second
/// batch detached), evaluate the velocity, regress onto the frozen targets
/// x + eta V, clip, AdamW-update, and advance the EMA shadow.
StepResult wflow_training_step(GeneratorParams& params, AdamState& adam, GeneratorParams& ema,
                               const TrainConfig& config, const Samplers& samplers,
                               TrainStreams& streams);

struct TrainCallbacks {
    int checkpoint_interval = 0;  // 0 = no checkpoints
    std::function<void(int step, const GeneratorParams& params, const GeneratorParams& ema)>
        on_checkpoint;
};

struct TrainResult {
    GeneratorParams params;
    GeneratorParams ema;
    std::vector<double> loss_trace;
};

TrainResult train_generator(const TrainConfig& config, const Samplers& samplers,
                            const TrainCallbacks& callbacks = {});

/// Draws `count` reference samples and maps them through the generator.
ParticleBatch sample(const GeneratorParams& params, const dist::DistributionSpec& p_ref,
                     Eigen::Index count, Rng& rng,
                     const std::optional<IntVector>& labels = std::nullopt,
                     std::optional<double> w = std::nullopt);

/// Guidance-scale training distribution: density proportional to
/// (w+1)^-exponent on [0, w_max], sampled by inverse CDF.
double sample_guidance_scale(double w_max, double exponent, Rng& rng);

/// Versioned JSON checkpoint: layer shapes, weights, EMA weights, step count,
/// and the full training configuration. Byte-stable for a fixed seed.
void save_checkpoint(const std::filesystem::path& path, const GeneratorParams& params,
                     const GeneratorParams& ema, long step, const TrainConfig& config);

struct Checkpoint {
    GeneratorParams params;
    GeneratorParams ema;
    long step = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameter flattening for landscape slices; fixed layer-major order
/// (weights row-major, then bias, per layer).
Vector flatten_parameters(const GeneratorParams& params);
GeneratorParams unflatten_parameters(const GeneratorParams& reference, const Vector& theta);

}  // namespace wgf::gen
