// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "crosssplit/errors.hpp"
#include "crosssplit/rng.hpp"

namespace crosssplit {

namespace {

// to_chars without a precision argument emits the shortest string that parses
// back to the same double; that is the backbone of every exact round trip in
// this repo.
void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& ctx) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("dataset: bad number '" + std::string(s) + "' in " + ctx);
    return v;
}

std::int64_t parse_int(std::string_view s, const std::string& ctx) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("dataset: bad integer '" + std::string(s) + "' in " + ctx);
    return v;
}

std::uint64_t parse_uint(std::string_view s, const std::string& ctx) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("dataset: bad integer '" + std::string(s) + "' in " + ctx);
    return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string to_string(NoiseSpec::Kind kind) {
    switch (kind) {
        case NoiseSpec::Kind::None: return "none";
        case NoiseSpec::Kind::Symmetric: return "symmetric";
        case NoiseSpec::Kind::Asymmetric: return "asymmetric";
    }
    return "none";
}

NoiseSpec::Kind noise_kind_from_string(const std::string& s) {
    if (s == "none") return NoiseSpec::Kind::None;
    if (s == "symmetric") return NoiseSpec::Kind::Symmetric;
    if (s == "asymmetric") return NoiseSpec::Kind::Asymmetric;
    throw ConfigError("noise: unknown kind '" + s + "'");
}

std::int64_t NoisyDataset::noisy_count() const {
    std::int64_t n = 0;
    for (std::size_t i = 0; i < examples.size(); ++i)
        if (is_noisy(i)) ++n;
    return n;
}

TrainView make_train_view(const NoisyDataset& ds) {
    TrainView v;
    v.num_classes = ds.num_classes;
    v.features = Matrix(ds.size(), ds.dim);
    v.labels.resize(ds.size());
    v.ids.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Example& ex = ds.examples[i];
        std::copy(ex.features.begin(), ex.features.end(), v.features.row(i));
        v.labels[i] = ex.assigned_label;
        v.ids[i] = ex.id;
    }
    return v;
}

NoisyDataset generate_blobs(int num_classes, int per_class, int dim,
                            double separation, std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("generate_blobs: need at least 2 classes");
    if (per_class < 1) throw ConfigError("generate_blobs: per_class must be >= 1");
    if (dim < 2) throw ConfigError("generate_blobs: dim must be >= 2");
    if (!(separation > 0.0)) throw ConfigError("generate_blobs: separation must be > 0");

    // Within-cluster spread. sep=3 then puts neighbouring means ~8.5 sigma
    // apart, i.e. nearly separable.
    constexpr double kSigma = 0.5;

    NoisyDataset ds;
    ds.num_classes = num_classes;
    ds.dim = dim;
    ds.gen_seed = seed;
    ds.examples.reserve(static_cast<std::size_t>(num_classes) * per_class);
    Rng rng(mix_seed({seed, 0x626c6f62ULL}));  // "blob"
    std::int64_t id = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Example ex;
            ex.id = id++;
            ex.true_label = c;
            ex.assigned_label = c;
            ex.features.resize(dim);
            for (int k = 0; k < dim; ++k) ex.features[k] = kSigma * rng.gaussian();
            ex.features[c % dim] += separation;
            ds.examples.push_back(std::move(ex));
        }
    }
    return ds;
}

namespace {

std::vector<std::size_t> pick_flip_ids(std::size_t n, double ratio, Rng& rng,
                                       std::int64_t& count_out) {
    std::int64_t count = std::llround(ratio * static_cast<double>(n));
    count_out = count;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(count));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

NoisyDataset inject_symmetric_noise(const NoisyDataset& ds, double ratio,
                                    std::uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0)
        throw ConfigError("inject_symmetric_noise: ratio must be in [0,1]");
    if (ds.noise.kind != NoiseSpec::Kind::None)
        throw ConfigError("inject_symmetric_noise: dataset already carries noise");
    NoisyDataset out = ds;
    out.noise.kind = NoiseSpec::Kind::Symmetric;
    out.noise.ratio = ratio;
    out.noise.seed = seed;
    Rng rng(mix_seed({seed, 0x73796d6dULL}));  // "symm"
    auto flips = pick_flip_ids(ds.size(), ratio, rng, out.noise.realized_flips);
    int c = ds.num_classes;
    for (std::size_t i : flips) {
        Example& ex = out.examples[i];
        // Uniform over the C-1 classes that are not the true one.
        int draw = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(c - 1)));
        ex.assigned_label = draw < ex.true_label ? draw : draw + 1;
    }
    return out;
}

NoisyDataset inject_asymmetric_noise(const NoisyDataset& ds, double ratio,
                                     const std::vector<int>& flip_map,
                                     std::uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0)
        throw ConfigError("inject_asymmetric_noise: ratio must be in [0,1]");
    if (ds.noise.kind != NoiseSpec::Kind::None)
        throw ConfigError("inject_asymmetric_noise: dataset already carries noise");
    if (flip_map.size() != static_cast<std::size_t>(ds.num_classes))
        throw ConfigError("inject_asymmetric_noise: flip_map must cover every class");
    for (int c = 0; c < ds.num_classes; ++c) {
        if (flip_map[c] < 0 || flip_map[c] >= ds.num_classes)
            throw ConfigError("inject_asymmetric_noise: flip_map target out of range");
        if (flip_map[c] == c)
            throw ConfigError("inject_asymmetric_noise: flip_map has a fixed point at class " +
                              std::to_string(c));
    }
    NoisyDataset out = ds;
    out.noise.kind = NoiseSpec::Kind::Asymmetric;
    out.noise.ratio = ratio;
    out.noise.seed = seed;
    out.noise.flip_map = flip_map;
    Rng rng(mix_seed({seed, 0x6173796dULL}));  // "asym"
    auto flips = pick_flip_ids(ds.size(), ratio, rng, out.noise.realized_flips);
    for (std::size_t i : flips) {
        Example& ex = out.examples[i];
        ex.assigned_label = flip_map[ex.true_label];
    }
    return out;
}

std::vector<int> circular_flip_map(int num_classes,
                                   const std::vector<std::vector<int>>& groups) {
    std::vector<std::vector<int>> gs = groups;
    if (gs.empty()) {
        gs.emplace_back(num_classes);
        std::iota(gs[0].begin(), gs[0].end(), 0);
    }
    std::vector<int> map(num_classes, -1);
    for (const auto& g : gs) {
        if (g.size() < 2)
            throw ConfigError("circular_flip_map: every group needs at least 2 classes");
        for (std::size_t i = 0; i < g.size(); ++i) {
            int c = g[i];
            if (c < 0 || c >= num_classes)
                throw ConfigError("circular_flip_map: class out of range in group");
            if (map[c] != -1)
                throw ConfigError("circular_flip_map: class " + std::to_string(c) +
                                  " appears in more than one group");
            map[c] = g[(i + 1) % g.size()];
        }
    }
    for (int c = 0; c < num_classes; ++c)
        if (map[c] == -1)
            throw ConfigError("circular_flip_map: class " + std::to_string(c) +
                              " missing from groups");
    return map;
}

SplitAssignment split_dataset(const NoisyDataset& ds, std::uint64_t seed) {
    if (ds.size() < 2) throw ConfigError("split_dataset: need at least 2 examples");
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(mix_seed({seed, 0x73706c69ULL}));  // "spli"
    rng.shuffle(idx);
    SplitAssignment sa;
    sa.seed = seed;
    std::size_t half = (ds.size() + 1) / 2;
    sa.d1.assign(idx.begin(), idx.begin() + half);
    sa.d2.assign(idx.begin() + half, idx.end());
    return sa;
}

void save_dataset(const NoisyDataset& ds, const std::string& path) {
    std::string out;
    out.reserve(ds.size() * (ds.dim * 20 + 16) + 128);
    out += "crosssplit-dataset,1,";
    out += std::to_string(ds.size());
    out += ',';
    out += std::to_string(ds.num_classes);
    out += ',';
    out += std::to_string(ds.dim);
    out += ',';
    out += to_string(ds.noise.kind);
    out += ',';
    append_double(out, ds.noise.ratio);
    out += ',';
    out += std::to_string(ds.gen_seed);
    out += ',';
    out += std::to_string(ds.noise.seed);
    out += '\n';
    for (const Example& ex : ds.examples) {
        out += std::to_string(ex.id);
        for (double f : ex.features) {
            out += ',';
            append_double(out, f);
        }
        out += ',';
        out += std::to_string(ex.true_label);
        out += ',';
        out += std::to_string(ex.assigned_label);
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("save_dataset: cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("save_dataset: write failed for '" + path + "'");
}

NoisyDataset load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_dataset: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line))
        throw ParseError("load_dataset: '" + path + "' is empty");
    auto head = split_csv(line);
    if (head.size() != 9 || head[0] != "crosssplit-dataset")
        throw ParseError("load_dataset: '" + path + "' has no valid header line");
    if (head[1] != "1")
        throw ParseError("load_dataset: unsupported format version '" +
                         std::string(head[1]) + "'");
    NoisyDataset ds;
    std::int64_t n = parse_int(head[2], "header N");
    ds.num_classes = static_cast<int>(parse_int(head[3], "header C"));
    ds.dim = static_cast<int>(parse_int(head[4], "header d"));
    ds.noise.kind = noise_kind_from_string(std::string(head[5]));
    ds.noise.ratio = parse_double(head[6], "header ratio");
    ds.gen_seed = parse_uint(head[7], "header gen_seed");
    ds.noise.seed = parse_uint(head[8], "header noise_seed");
    if (n < 0 || ds.num_classes < 2 || ds.dim < 1)
        throw ParseError("load_dataset: header sizes out of range in '" + path + "'");

    ds.examples.reserve(static_cast<std::size_t>(n));
    std::int64_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_csv(line);
        std::string ctx = "line " + std::to_string(lineno);
        if (fields.size() != static_cast<std::size_t>(ds.dim) + 3)
            throw ParseError("load_dataset: " + ctx + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(ds.dim + 3));
        Example ex;
        ex.id = parse_int(fields[0], ctx + " field id");
        ex.features.resize(ds.dim);
        for (int k = 0; k < ds.dim; ++k) {
            double v = parse_double(fields[1 + k], ctx + " feature " + std::to_string(k));
            if (!std::isfinite(v))
                throw ParseError("load_dataset: non-finite feature at " + ctx);
            ex.features[k] = v;
        }
        ex.true_label = static_cast<int>(parse_int(fields[ds.dim + 1], ctx + " true_label"));
        ex.assigned_label =
            static_cast<int>(parse_int(fields[ds.dim + 2], ctx + " assigned_label"));
        if (ex.true_label < 0 || ex.true_label >= ds.num_classes)
            throw ParseError("load_dataset: true_label out of range for id " +
                             std::to_string(ex.id));
        if (ex.assigned_label < 0 || ex.assigned_label >= ds.num_classes)
            throw ParseError("load_dataset: assigned_label out of range for id " +
                             std::to_string(ex.id));
        ds.examples.push_back(std::move(ex));
    }
    if (static_cast<std::int64_t>(ds.examples.size()) != n)
        throw ParseError("load_dataset: '" + path + "' declares " + std::to_string(n) +
                         " examples but contains " + std::to_string(ds.examples.size()));
    std::vector<bool> seen(ds.examples.size(), false);
    for (const Example& ex : ds.examples) {
        if (ex.id < 0 || ex.id >= n || seen[static_cast<std::size_t>(ex.id)])
            throw ParseError("load_dataset: ids must be unique and in [0,N); offending id " +
                             std::to_string(ex.id));
        seen[static_cast<std::size_t>(ex.id)] = true;
    }
    std::int64_t flips = ds.noisy_count();
    ds.noise.realized_flips = flips;
    return ds;
}

}  // namespace crosssplit
