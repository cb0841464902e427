// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/nn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crosssplit/errors.hpp"
#include "crosssplit/kernels.hpp"
#include "crosssplit/rng.hpp"

namespace crosssplit {

double lr_at(int epoch, const LrSchedule& sched, double base_lr) {
    if (sched.total_epochs < 1)
        throw ConfigError("lr_at: schedule total_epochs must be >= 1");
    if (epoch < 0) throw ConfigError("lr_at: epoch must be >= 0");
    if (epoch > sched.total_epochs)
        throw ConfigError("lr_at: epoch " + std::to_string(epoch) +
                          " beyond schedule horizon " +
                          std::to_string(sched.total_epochs));
    if (sched.kind == LrSchedule::Kind::Cosine) {
        double t = static_cast<double>(epoch) / sched.total_epochs;
        return base_lr * (1.0 + std::cos(3.14159265358979323846 * t)) / 2.0;
    }
    int hits = 0;
    for (int m : sched.milestones)
        if (m <= epoch) ++hits;
    return base_lr * std::pow(sched.decay, hits);
}

MlpNetwork make_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw ConfigError("make_mlp: need at least input and output layers");
    for (int s : layer_sizes)
        if (s < 1) throw ConfigError("make_mlp: layer sizes must be positive");
    MlpNetwork net;
    net.layer_sizes = layer_sizes;
    Rng rng(mix_seed({seed, 0x696e6974ULL}));  // "init"
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        int fan_in = layer_sizes[l];
        int fan_out = layer_sizes[l + 1];
        Matrix w(fan_in, fan_out);
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w.data) v = (2.0 * rng.uniform() - 1.0) * bound;
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

ForwardCache forward(const MlpNetwork& net, const Matrix& batch) {
    if (batch.cols != static_cast<std::size_t>(net.input_dim()))
        throw ContractError("forward: batch has " + std::to_string(batch.cols) +
                            " columns, network expects " +
                            std::to_string(net.input_dim()));
    ForwardCache cache;
    cache.act.reserve(net.num_layers() + 1);
    cache.pre.reserve(net.num_layers());
    cache.act.push_back(batch);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        Matrix z = matmul(cache.act.back(), net.weights[l]);
        add_bias_rows(z, net.biases[l]);
        bool last = l + 1 == net.num_layers();
        cache.act.push_back(last ? z : relu(z));
        cache.pre.push_back(std::move(z));
    }
    return cache;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const double* in = logits.row(r);
        double* o = out.row(r);
        double mx = in[0];
        for (std::size_t c = 1; c < logits.cols; ++c) mx = std::max(mx, in[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            o[c] = std::exp(in[c] - mx);
            sum += o[c];
        }
        for (std::size_t c = 0; c < logits.cols; ++c) o[c] /= sum;
    }
    return out;
}

double cross_entropy_soft(const Matrix& pred_probs, const Matrix& targets) {
    if (!pred_probs.same_shape(targets))
        throw ContractError("cross_entropy_soft: shape mismatch");
    if (pred_probs.rows == 0) return 0.0;
    constexpr double kEps = 1e-12;
    double total = 0.0;
    for (std::size_t r = 0; r < pred_probs.rows; ++r) {
        const double* p = pred_probs.row(r);
        const double* t = targets.row(r);
        double row = 0.0;
        for (std::size_t c = 0; c < pred_probs.cols; ++c)
            if (t[c] != 0.0) row -= t[c] * std::log(p[c] + kEps);
        total += row;
    }
    return total / static_cast<double>(pred_probs.rows);
}

Gradients zero_gradients(const MlpNetwork& net) {
    Gradients g;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        g.dw.emplace_back(net.weights[l].rows, net.weights[l].cols);
        g.db.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

void add_scaled(Gradients& acc, const Gradients& g, double w) {
    if (acc.dw.size() != g.dw.size())
        throw ContractError("add_scaled: gradient layer count mismatch");
    for (std::size_t l = 0; l < acc.dw.size(); ++l) {
        axpy_into(w, g.dw[l], acc.dw[l]);
        kernels().axpy(g.db[l].size(), w, g.db[l].data(), acc.db[l].data());
    }
}

static Gradients backward_impl(const MlpNetwork& net, const ForwardCache& cache,
                               const Matrix& dlogits, const Matrix* dembed) {
    if (!dlogits.same_shape(cache.logits()))
        throw ContractError("backward: dlogits shape mismatch");
    if (dembed && !dembed->same_shape(cache.embeddings()))
        throw ContractError("backward: dembed shape mismatch");
    Gradients g;
    g.dw.resize(net.num_layers());
    g.db.resize(net.num_layers());
    Matrix delta = dlogits;
    for (std::size_t l = net.num_layers(); l-- > 0;) {
        g.dw[l] = matmul_tn(cache.act[l], delta);
        g.db[l] = column_sums(delta);
        if (l > 0) {
            Matrix da = matmul_nt(delta, net.weights[l]);
            if (dembed && l == net.num_layers() - 1) axpy_into(1.0, *dembed, da);
            relu_mask_inplace(cache.pre[l - 1], da);
            delta = std::move(da);
        }
    }
    return g;
}

Gradients backward(const MlpNetwork& net, const ForwardCache& cache,
                   const Matrix& dlogits) {
    return backward_impl(net, cache, dlogits, nullptr);
}

Gradients backward(const MlpNetwork& net, const ForwardCache& cache,
                   const Matrix& dlogits, const Matrix& dembed) {
    return backward_impl(net, cache, dlogits, &dembed);
}

OptimizerState make_optimizer(const MlpNetwork& net, double momentum,
                              double weight_decay, double base_lr,
                              LrSchedule schedule) {
    OptimizerState opt;
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    opt.base_lr = base_lr;
    opt.schedule = schedule;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        opt.vel_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
        opt.vel_b.emplace_back(net.biases[l].size(), 0.0);
    }
    return opt;
}

void sgd_step(MlpNetwork& net, OptimizerState& opt, const Gradients& grads,
              double lr) {
    if (grads.dw.size() != net.num_layers())
        throw ContractError("sgd_step: gradient layer count mismatch");
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        if (!all_finite(grads.dw[l]) || !all_finite(grads.db[l]))
            throw DivergedError("sgd_step: non-finite gradient in layer " +
                                    std::to_string(l),
                                -1);
        // v <- momentum*v + g + wd*theta; theta <- theta - lr*v.
        Matrix& vw = opt.vel_w[l];
        scale_inplace(vw, opt.momentum);
        axpy_into(1.0, grads.dw[l], vw);
        axpy_into(opt.weight_decay, net.weights[l], vw);
        axpy_into(-lr, vw, net.weights[l]);

        auto& vb = opt.vel_b[l];
        kernels().scale(vb.size(), opt.momentum, vb.data());
        kernels().axpy(vb.size(), 1.0, grads.db[l].data(), vb.data());
        kernels().axpy(vb.size(), opt.weight_decay, net.biases[l].data(), vb.data());
        kernels().axpy(vb.size(), -lr, vb.data(), net.biases[l].data());
    }
    ++net.revision;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

double read_double(std::istream& in, const std::string& ctx) {
    std::string tok;
    if (!(in >> tok)) throw ParseError("checkpoint: missing value for " + ctx);
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ParseError("checkpoint: bad number '" + tok + "' in " + ctx);
    return v;
}

void append_block(std::string& out, const char* tag, const std::vector<double>& v) {
    out += tag;
    for (double x : v) {
        out += ' ';
        append_double(out, x);
    }
    out += '\n';
}

}  // namespace

void save_checkpoint(const MlpNetwork& net, const OptimizerState& opt,
                     const std::string& path) {
    std::string out = "crosssplit-checkpoint 1\n";
    out += "layers";
    for (int s : net.layer_sizes) out += ' ' + std::to_string(s);
    out += '\n';
    out += "revision " + std::to_string(net.revision) + '\n';
    out += "optimizer ";
    append_double(out, opt.momentum);
    out += ' ';
    append_double(out, opt.weight_decay);
    out += ' ';
    append_double(out, opt.base_lr);
    out += ' ';
    out += opt.schedule.kind == LrSchedule::Kind::Cosine ? "cosine" : "multistep";
    out += ' ' + std::to_string(opt.schedule.total_epochs);
    out += ' ';
    append_double(out, opt.schedule.decay);
    out += ' ' + std::to_string(opt.schedule.milestones.size());
    for (int m : opt.schedule.milestones) out += ' ' + std::to_string(m);
    out += '\n';
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        append_block(out, "w", net.weights[l].data);
        append_block(out, "b", net.biases[l]);
        append_block(out, "vw", opt.vel_w[l].data);
        append_block(out, "vb", opt.vel_b[l]);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("save_checkpoint: cannot open '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("save_checkpoint: write failed for '" + path + "'");
}

void load_checkpoint(MlpNetwork& net, OptimizerState& opt, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_checkpoint: cannot open '" + path + "'");
    std::string tag;
    int version = 0;
    if (!(f >> tag >> version) || tag != "crosssplit-checkpoint" || version != 1)
        throw ParseError("load_checkpoint: '" + path + "' is not a v1 checkpoint");
    if (!(f >> tag) || tag != "layers")
        throw ParseError("load_checkpoint: missing layers block");
    std::vector<int> sizes;
    {
        std::string rest;
        std::getline(f, rest);
        std::istringstream ls(rest);
        int s;
        while (ls >> s) sizes.push_back(s);
    }
    if (sizes.size() < 2) throw ParseError("load_checkpoint: bad layer list");
    if (!(f >> tag) || tag != "revision")
        throw ParseError("load_checkpoint: missing revision");
    std::uint64_t revision = 0;
    if (!(f >> revision)) throw ParseError("load_checkpoint: bad revision");
    if (!(f >> tag) || tag != "optimizer")
        throw ParseError("load_checkpoint: missing optimizer block");
    MlpNetwork fresh;
    fresh.layer_sizes = sizes;
    fresh.revision = revision;
    OptimizerState fopt;
    fopt.momentum = read_double(f, "momentum");
    fopt.weight_decay = read_double(f, "weight_decay");
    fopt.base_lr = read_double(f, "base_lr");
    std::string kind;
    if (!(f >> kind)) throw ParseError("load_checkpoint: missing schedule kind");
    if (kind == "cosine")
        fopt.schedule.kind = LrSchedule::Kind::Cosine;
    else if (kind == "multistep")
        fopt.schedule.kind = LrSchedule::Kind::Multistep;
    else
        throw ParseError("load_checkpoint: unknown schedule kind '" + kind + "'");
    if (!(f >> fopt.schedule.total_epochs))
        throw ParseError("load_checkpoint: bad schedule horizon");
    fopt.schedule.decay = read_double(f, "schedule decay");
    std::size_t n_miles = 0;
    if (!(f >> n_miles)) throw ParseError("load_checkpoint: bad milestone count");
    fopt.schedule.milestones.resize(n_miles);
    for (std::size_t i = 0; i < n_miles; ++i)
        if (!(f >> fopt.schedule.milestones[i]))
            throw ParseError("load_checkpoint: bad milestone");

    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::size_t wn = static_cast<std::size_t>(sizes[l]) * sizes[l + 1];
        std::size_t bn = static_cast<std::size_t>(sizes[l + 1]);
        Matrix w(sizes[l], sizes[l + 1]), vw(sizes[l], sizes[l + 1]);
        std::vector<double> b(bn), vb(bn);
        auto read_block = [&](const char* want, double* dst, std::size_t count) {
            std::string t;
            if (!(f >> t) || t != want)
                throw ParseError("load_checkpoint: expected block '" + std::string(want) +
                                 "' in layer " + std::to_string(l));
            for (std::size_t i = 0; i < count; ++i) dst[i] = read_double(f, want);
        };
        read_block("w", w.data.data(), wn);
        read_block("b", b.data(), bn);
        read_block("vw", vw.data.data(), wn);
        read_block("vb", vb.data(), bn);
        fresh.weights.push_back(std::move(w));
        fresh.biases.push_back(std::move(b));
        fopt.vel_w.push_back(std::move(vw));
        fopt.vel_b.push_back(std::move(vb));
    }
    net = std::move(fresh);
    opt = std::move(fopt);
}

}  // namespace crosssplit
