#include "wgf/generator.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <variant>

#include "wgf/serialization.hpp"

namespace wgf::gen {

namespace {

// Vectorized logistic; exp overflow saturates to the correct 0/1 limits.
Matrix logistic(const Matrix& z) {
    return (1.0 + (-z.array()).exp()).inverse().matrix();
}

Matrix apply_activation(const Matrix& z, Activation act) {
    if (act == Activation::SiLU) return z.cwiseProduct(logistic(z));
    return z.array().tanh().matrix();
}

Matrix activation_derivative(const Matrix& z, Activation act) {
    if (act == Activation::SiLU) {
        const Matrix s = logistic(z);
        return (s.array() * (1.0 + z.array() * (1.0 - s.array()))).matrix();
    }
    return (1.0 - z.array().tanh().square()).matrix();
}

bool velocity_needs_self_batch(const vel::VelocityFieldSpec& spec) {
    if (std::holds_alternative<vel::SinkhornField>(spec.kind))
        return std::get<vel::SinkhornField>(spec.kind).self_estimator == vel::SelfEstimator::TwoBatch;
    if (std::holds_alternative<vel::KlAnalyticField>(spec.kind)) return false;
    return true;  // MMD and KDE estimators use an independent second batch
}

nlohmann::json layers_to_json(const std::vector<Layer>& layers) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& l : layers) arr.push_back(nlohmann::json{{"weight", l.weight}, {"bias", l.bias}});
    return arr;
}

std::vector<Layer> layers_from_json(const nlohmann::json& arr) {
    std::vector<Layer> layers;
    for (const auto& l : arr) {
        Layer layer;
        layer.weight = l.at("weight").get<Matrix>();
        layer.bias = l.at("bias").get<Vector>();
        layers.push_back(std::move(layer));
    }
    return layers;
}

}  // namespace

void GeneratorParams::validate() const {
    if (layers.empty()) throw ContractViolation("GeneratorParams: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].bias.size() != layers[l].weight.rows())
            throw ContractViolation("GeneratorParams: bias/weight shape mismatch at layer " +
                                    std::to_string(l));
        if (l + 1 < layers.size() && layers[l + 1].weight.cols() != layers[l].weight.rows())
            throw ContractViolation("GeneratorParams: layer dimensions do not chain at layer " +
                                    std::to_string(l));
    }
    if (num_classes < 0) throw ContractViolation("GeneratorParams: num_classes must be >= 0");
    if (data_input_dim() < 1) throw ContractViolation("GeneratorParams: nonpositive data input width");
    if (residual && data_input_dim() != output_dim())
        throw ContractViolation("GeneratorParams: residual mode needs data input width == output width");
}

GeneratorParams make_mlp(int data_in, int out, const std::vector<int>& hidden, Activation activation,
                         bool residual, int num_classes, bool guidance_input, bool zero_init_last,
                         Rng& rng) {
    if (data_in < 1 || out < 1) throw ContractViolation("make_mlp: invalid input/output widths");
    GeneratorParams params;
    params.activation = activation;
    params.residual = residual;
    params.num_classes = num_classes;
    params.guidance_input = guidance_input;

    std::vector<int> widths;
    widths.push_back(data_in + num_classes + (guidance_input ? 1 : 0));
    for (const int h : hidden) {
        if (h < 1) throw ContractViolation("make_mlp: hidden widths must be positive");
        widths.push_back(h);
    }
    widths.push_back(out);

    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer;
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        layer.weight = std_dev * rng.normal_matrix(fan_out, fan_in);
        layer.bias = Vector::Zero(fan_out);
        params.layers.push_back(std::move(layer));
    }
    if (zero_init_last) params.layers.back().weight.setZero();
    params.validate();
    return params;
}

Matrix forward(const GeneratorParams& params, const Matrix& inputs,
               const std::optional<IntVector>& labels, std::optional<double> w, ForwardCache* cache) {
    params.validate();
    if (inputs.cols() != params.data_input_dim())
        throw ContractViolation("forward: input width does not match the network");
    if (params.num_classes > 0 && !labels)
        throw ContractViolation("forward: conditional network needs labels");
    if (labels && labels->size() != inputs.rows())
        throw ContractViolation("forward: labels length does not match batch");
    if (params.guidance_input && !w)
        throw ContractViolation("forward: network expects a guidance-scale input");

    const Eigen::Index n = inputs.rows();
    Matrix net_input(n, params.net_input_dim());
    net_input.leftCols(inputs.cols()) = inputs;
    Eigen::Index col = inputs.cols();
    if (params.num_classes > 0) {
        net_input.middleCols(col, params.num_classes).setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = (*labels)(i);
            if (c < 0 || c >= params.num_classes)
                throw ContractViolation("forward: label out of range at row " + std::to_string(i));
            net_input(i, col + c) = 1.0;
        }
        col += params.num_classes;
    }
    if (params.guidance_input) net_input.col(col).setConstant(*w);

    const std::size_t depth = params.layers.size();
    Matrix local;
    const Matrix* acts;
    if (cache) {
        cache->net_input = std::move(net_input);
        cache->pre.assign(depth, Matrix{});
        cache->post.assign(depth, Matrix{});
        acts = &cache->net_input;
    } else {
        local = std::move(net_input);
        acts = &local;
    }

    Matrix output;
    for (std::size_t l = 0; l < depth; ++l) {
        Matrix pre = *acts * params.layers[l].weight.transpose();
        pre.rowwise() += params.layers[l].bias.transpose();
        if (l + 1 < depth) {
            Matrix post = apply_activation(pre, params.activation);
            if (cache) {
                cache->pre[l] = std::move(pre);
                cache->post[l] = std::move(post);
                acts = &cache->post[l];
            } else {
                local = std::move(post);
                acts = &local;
            }
        } else {
            if (cache) cache->pre[l] = pre;
            output = std::move(pre);
        }
    }
    if (params.residual) output += inputs;
    return output;
}

std::vector<Layer> backward(const GeneratorParams& params, const ForwardCache& cache,
                            const Matrix& upstream) {
    const std::size_t depth = params.layers.size();
    if (cache.pre.size() != depth)
        throw ContractViolation("backward: cache does not match the network depth");
    if (upstream.rows() != cache.net_input.rows() ||
        upstream.cols() != params.layers.back().weight.rows())
        throw ContractViolation("backward: upstream gradient has wrong shape");

    std::vector<Layer> grads(depth);
    Matrix delta = upstream;  // dL/d(pre-activation of current layer)
    for (std::size_t l = depth; l-- > 0;) {
        const Matrix& input_acts = l == 0 ? cache.net_input : cache.post[l - 1];
        grads[l].weight = delta.transpose() * input_acts;
        grads[l].bias = delta.colwise().sum().transpose();
        if (l > 0) {
            const Matrix upstream_acts = delta * params.layers[l].weight;
            delta = upstream_acts.cwiseProduct(activation_derivative(cache.pre[l - 1], params.activation));
        }
    }
    return grads;
}

double global_gradient_norm(const std::vector<Layer>& grads) {
    double sq = 0.0;
    for (const auto& g : grads) sq += g.weight.squaredNorm() + g.bias.squaredNorm();
    return std::sqrt(sq);
}

AdamState AdamState::zeros_like(const GeneratorParams& params) {
    AdamState s;
    for (const auto& l : params.layers) {
        s.first_moment.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                                  Vector::Zero(l.bias.size())});
        s.second_moment.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                                   Vector::Zero(l.bias.size())});
    }
    return s;
}

void TrainConfig::validate() const {
    if (batch_n < 1) throw ContractViolation("TrainConfig: batch_n must be >= 1");
    if (batch_m < 1) throw ContractViolation("TrainConfig: batch_m must be >= 1");
    if (!(learning_rate > 0.0)) throw ContractViolation("TrainConfig: learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ContractViolation("TrainConfig: beta1 out of [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ContractViolation("TrainConfig: beta2 out of [0,1)");
    if (weight_decay < 0.0) throw ContractViolation("TrainConfig: weight_decay must be >= 0");
    if (grad_clip < 0.0) throw ContractViolation("TrainConfig: grad_clip must be >= 0 (0 disables)");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ContractViolation("TrainConfig: ema_decay out of [0,1)");
    if (steps < 0) throw ContractViolation("TrainConfig: steps must be >= 0");
    if (!(step_size >= 0.0)) throw ContractViolation("TrainConfig: step_size must be >= 0");
    if (uncond_batch < 1) throw ContractViolation("TrainConfig: uncond_batch must be >= 1");
    if (!(w_max > 0.0)) throw ContractViolation("TrainConfig: w_max must be positive");
    if (!(w_exponent > 1.0)) throw ContractViolation("TrainConfig: w_exponent must exceed 1");
    if (feature_map_a.has_value() != feature_map_b.has_value())
        throw ContractViolation("TrainConfig: feature map needs both A and b");
    velocity.validate();
}

TrainStreams TrainStreams::from_seed(std::uint64_t seed) {
    const Rng root(seed);
    return TrainStreams{root.stream("train/z"),      root.stream("train/z_second"),
                        root.stream("train/target"), root.stream("train/uncond"),
                        root.stream("train/w"),      root.stream("train/labels")};
}

double sample_guidance_scale(double w_max, double exponent, Rng& rng) {
    // Inverse CDF of p(w) ~ (w+1)^-exponent on [0, w_max].
    const double k = exponent - 1.0;
    const double tail = std::pow(w_max + 1.0, -k);
    const double u = rng.uniform();
    return std::pow(1.0 - u * (1.0 - tail), -1.0 / k) - 1.0;
}

StepResult wflow_training_step(GeneratorParams& params, AdamState& adam, GeneratorParams& ema,
                               const TrainConfig& config, const Samplers& samplers,
                               TrainStreams& streams) {
    config.validate();
    const Eigen::Index n = config.batch_n;
    const Eigen::Index m = config.batch_m;

    // Class-conditional steps train one class at a time, sampled by mixture mass.
    std::optional<IntVector> batch_labels;
    dist::DistributionSpec target_spec = samplers.target;
    if (config.conditional) {
        const auto& gm = std::get<dist::GaussianMixture>(samplers.target.kind);
        const double u = streams.labels.uniform();
        double acc = 0.0;
        int c = static_cast<int>(gm.weights.size()) - 1;
        for (std::size_t k = 0; k < gm.weights.size(); ++k) {
            acc += gm.weights[k];
            if (u < acc) {
                c = static_cast<int>(k);
                break;
            }
        }
        batch_labels = IntVector::Constant(n, c);
        target_spec = dist::conditional(samplers.target, c);
    }

    const bool guided = config.velocity.has_guidance();
    double w_used = config.velocity.guidance_scale();
    if (guided && config.sample_guidance_scale)
        w_used = sample_guidance_scale(config.w_max, config.w_exponent, streams.w);
    vel::VelocityFieldSpec spec = config.velocity;
    if (std::holds_alternative<vel::DistributionGuidance>(spec.guidance))
        spec.guidance = vel::DistributionGuidance{w_used};
    else if (std::holds_alternative<vel::VelocityGuidance>(spec.guidance))
        spec.guidance = vel::VelocityGuidance{w_used};

    const std::optional<double> w_input =
        params.guidance_input ? std::optional<double>(w_used) : std::nullopt;

    // Prediction branch (cached for backprop) and detached second batch.
    const ParticleBatch z = dist::sample(samplers.p_ref, n, streams.z);
    ForwardCache cache;
    const Matrix x = forward(params, z.positions, batch_labels, w_input, &cache);

    std::optional<ParticleBatch> self_batch;
    if (velocity_needs_self_batch(config.velocity)) {
        const ParticleBatch z2 = dist::sample(samplers.p_ref, n, streams.z_second);
        self_batch = ParticleBatch::uniform(forward(params, z2.positions, batch_labels, w_input));
    }

    const ParticleBatch y = dist::sample(target_spec, m, streams.target);

    std::optional<ParticleBatch> uncond;
    if (guided) {
        if (!samplers.target_uncond)
            throw ContractViolation("wflow_training_step: guidance needs an unconditional sampler");
        uncond = dist::sample(*samplers.target_uncond, config.uncond_batch, streams.uncond);
    }

    // Optional affine feature lift phi(x) = A x + b.
    const bool lifted = config.feature_map_a.has_value();
    auto lift = [&](const Matrix& pts) -> Matrix {
        if (!lifted) return pts;
        Matrix out = pts * config.feature_map_a->transpose();
        out.rowwise() += config.feature_map_b->transpose();
        return out;
    };

    const ParticleBatch qf = ParticleBatch::uniform(lift(x));
    const ParticleBatch pf = ParticleBatch::uniform(lift(y.positions));
    std::optional<ParticleBatch> sf;
    if (self_batch) sf = ParticleBatch::uniform(lift(self_batch->positions));
    std::optional<ParticleBatch> uf;
    if (uncond) uf = ParticleBatch::uniform(lift(uncond->positions));

    vel::VelocityContext ctx;
    if (sf) ctx.self_batch = &*sf;
    if (uf) ctx.target_uncond = &*uf;
    const vel::VelocityBatch v = vel::evaluate(spec, qf, pf, ctx);

    // Frozen regression target; gradients flow only through the prediction.
    const Matrix x_lifted = qf.positions;
    const Matrix target = x_lifted + config.step_size * v.vectors;
    const Matrix diff = x_lifted - target;
    const double loss = diff.squaredNorm() / static_cast<double>(n);
    if (!std::isfinite(loss)) throw DivergenceError("wflow_training_step: non-finite loss", adam.step);

    Matrix upstream = (2.0 / static_cast<double>(n)) * diff;
    if (lifted) upstream = upstream * (*config.feature_map_a);
    std::vector<Layer> grads = backward(params, cache, upstream);

    double grad_norm = global_gradient_norm(grads);
    if (config.grad_clip > 0.0 && grad_norm > config.grad_clip) {
        const double scale = config.grad_clip / grad_norm;
        for (auto& g : grads) {
            g.weight *= scale;
            g.bias *= scale;
        }
    }

    // AdamW with bias correction and decoupled weight decay; all updates in place.
    adam.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.step));
    constexpr double kAdamEps = 1e-8;
    const auto adam_update = [&]<typename T>(T& p, T& m, T& v, const T& g) {
        m.array() = config.beta1 * m.array() + (1.0 - config.beta1) * g.array();
        v.array() = config.beta2 * v.array() + (1.0 - config.beta2) * g.array().square();
        p.array() -= config.learning_rate * ((m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps) +
                                             config.weight_decay * p.array());
    };
    // Warmup ramp removes the cold-start bias of a shadow initialized at the
    // random weights; the decay reaches its configured value as steps grow.
    const double t = static_cast<double>(adam.step);
    const double decay = std::min(config.ema_decay, (1.0 + t) / (10.0 + t));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        adam_update(params.layers[l].weight, adam.first_moment[l].weight, adam.second_moment[l].weight,
                    grads[l].weight);
        adam_update(params.layers[l].bias, adam.first_moment[l].bias, adam.second_moment[l].bias,
                    grads[l].bias);
        ema.layers[l].weight.array() =
            decay * ema.layers[l].weight.array() + (1.0 - decay) * params.layers[l].weight.array();
        ema.layers[l].bias.array() =
            decay * ema.layers[l].bias.array() + (1.0 - decay) * params.layers[l].bias.array();
    }

    return StepResult{loss, grad_norm, guided ? w_used : 0.0};
}

TrainResult train_generator(const TrainConfig& config, const Samplers& samplers,
                            const TrainCallbacks& callbacks) {
    config.validate();
    const int data_in = dist::dimension(samplers.p_ref);
    const int out = dist::dimension(samplers.target);
    int num_classes = 0;
    if (config.conditional) {
        if (!std::holds_alternative<dist::GaussianMixture>(samplers.target.kind))
            throw ContractViolation("train_generator: conditional training needs a mixture target");
        num_classes = static_cast<int>(std::get<dist::GaussianMixture>(samplers.target.kind).weights.size());
    }

    Rng init_stream = Rng(config.seed).stream("train/init");
    GeneratorParams params =
        make_mlp(data_in, out, config.hidden, config.activation, config.residual, num_classes,
                 config.sample_guidance_scale, config.zero_init_last, init_stream);
    GeneratorParams ema = params;
    AdamState adam = AdamState::zeros_like(params);
    TrainStreams streams = TrainStreams::from_seed(config.seed);

    TrainResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(config.steps));
    if (callbacks.checkpoint_interval > 0 && callbacks.on_checkpoint)
        callbacks.on_checkpoint(0, params, ema);
    for (int step = 0; step < config.steps; ++step) {
        StepResult sr;
        try {
            sr = wflow_training_step(params, adam, ema, config, samplers, streams);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " at training step " + std::to_string(step),
                                  step);
        }
        result.loss_trace.push_back(sr.loss);
        if (callbacks.checkpoint_interval > 0 && callbacks.on_checkpoint &&
            (step + 1) % callbacks.checkpoint_interval == 0)
            callbacks.on_checkpoint(step + 1, params, ema);
    }
    result.params = std::move(params);
    result.ema = std::move(ema);
    return result;
}

ParticleBatch sample(const GeneratorParams& params, const dist::DistributionSpec& p_ref,
                     Eigen::Index count, Rng& rng, const std::optional<IntVector>& labels,
                     std::optional<double> w) {
    if (count == 0) {
        ParticleBatch empty;
        empty.positions = Matrix(0, params.output_dim());
        empty.weights = Vector(0);
        return empty;
    }
    const ParticleBatch z = dist::sample(p_ref, count, rng);
    std::optional<IntVector> used_labels = labels;
    if (params.num_classes > 0 && !used_labels && z.labels) used_labels = z.labels;
    const Matrix out = forward(params, z.positions, used_labels, w);
    if (used_labels) return ParticleBatch::uniform(out, *used_labels);
    return ParticleBatch::uniform(out);
}

void save_checkpoint(const std::filesystem::path& path, const GeneratorParams& params,
                     const GeneratorParams& ema, long step, const TrainConfig& config) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["activation"] = params.activation == Activation::SiLU ? "silu" : "tanh";
    j["residual"] = params.residual;
    j["num_classes"] = params.num_classes;
    j["guidance_input"] = params.guidance_input;
    j["layers"] = layers_to_json(params.layers);
    j["ema_layers"] = layers_to_json(ema.layers);
    j["step"] = step;
    nlohmann::json cfg;
    cfg["batch_n"] = config.batch_n;
    cfg["batch_m"] = config.batch_m;
    cfg["learning_rate"] = config.learning_rate;
    cfg["beta1"] = config.beta1;
    cfg["beta2"] = config.beta2;
    cfg["weight_decay"] = config.weight_decay;
    cfg["grad_clip"] = config.grad_clip;
    cfg["ema_decay"] = config.ema_decay;
    cfg["steps"] = config.steps;
    cfg["step_size"] = config.step_size;
    cfg["seed"] = config.seed;
    cfg["hidden"] = config.hidden;
    cfg["activation"] = config.activation == Activation::SiLU ? "silu" : "tanh";
    cfg["residual"] = config.residual;
    cfg["zero_init_last"] = config.zero_init_last;
    if (config.feature_map_a) {
        cfg["feature_map_a"] = *config.feature_map_a;
        cfg["feature_map_b"] = *config.feature_map_b;
    }
    cfg["conditional"] = config.conditional;
    cfg["uncond_batch"] = config.uncond_batch;
    cfg["sample_guidance_scale"] = config.sample_guidance_scale;
    cfg["w_max"] = config.w_max;
    cfg["w_exponent"] = config.w_exponent;
    cfg["eval_ema"] = config.eval_ema;
    cfg["velocity"] = config.velocity;
    j["train_config"] = std::move(cfg);

    std::ofstream out(path);
    if (!out) throw InputError("save_checkpoint: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("load_checkpoint: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format_version", 0) != 1)
        throw InputError("load_checkpoint: unsupported format version");

    Checkpoint ckpt;
    GeneratorParams base;
    base.activation = j.at("activation").get<std::string>() == "silu" ? Activation::SiLU : Activation::Tanh;
    base.residual = j.at("residual").get<bool>();
    base.num_classes = j.at("num_classes").get<int>();
    base.guidance_input = j.at("guidance_input").get<bool>();
    base.layers = layers_from_json(j.at("layers"));
    base.validate();
    ckpt.params = base;
    base.layers = layers_from_json(j.at("ema_layers"));
    base.validate();
    ckpt.ema = std::move(base);
    ckpt.step = j.at("step").get<long>();
    return ckpt;
}

Vector flatten_parameters(const GeneratorParams& params) {
    Eigen::Index total = 0;
    for (const auto& l : params.layers) total += l.weight.size() + l.bias.size();
    Vector theta(total);
    Eigen::Index k = 0;
    for (const auto& l : params.layers) {
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) theta(k++) = l.weight(i, j);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) theta(k++) = l.bias(i);
    }
    return theta;
}

GeneratorParams unflatten_parameters(const GeneratorParams& reference, const Vector& theta) {
    GeneratorParams out = reference;
    Eigen::Index k = 0;
    for (auto& l : out.layers) {
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = theta(k++);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = theta(k++);
    }
    if (k != theta.size())
        throw ContractViolation("unflatten_parameters: parameter vector length mismatch");
    return out;
}

}  // namespace wgf::gen
