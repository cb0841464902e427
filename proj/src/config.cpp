// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "crosssplit/errors.hpp"

namespace crosssplit {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& what) {
    throw ConfigError("[" + section + "] " + key + ": " + what);
}

double parse_double(const std::string& section, const std::string& key,
                    const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        bad_value(section, key, "expected a number, got '" + v + "'");
    }
    return out;
}

long long parse_int(const std::string& section, const std::string& key,
                    const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        bad_value(section, key, "expected an integer, got '" + v + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& section, const std::string& key,
                        const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        bad_value(section, key, "expected an unsigned integer, got '" + v + "'");
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& section, const std::string& key,
                                const std::string& v) {
    std::vector<int> out;
    for (const std::string& item : split_on(v, ',')) {
        out.push_back(static_cast<int>(parse_int(section, key, item)));
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw ContractError("double formatting failed");
    return std::string(buf, end);
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += std::to_string(v[i]);
    }
    return out;
}

void validate(const FullConfig& cfg) {
    const DataConfig& d = cfg.data;
    if (d.classes < 2) throw ConfigError("[data] classes must be >= 2");
    if (d.per_class < 1) throw ConfigError("[data] per_class must be >= 1");
    if (d.dim < 2) throw ConfigError("[data] dim must be >= 2");
    if (!(d.separation > 0.0)) throw ConfigError("[data] separation must be > 0");
    if (d.test_per_class < 1) throw ConfigError("[data] test_per_class must be >= 1");

    const NoiseSettings& n = cfg.noise;
    if (!(n.ratio >= 0.0 && n.ratio <= 1.0)) {
        throw ConfigError("[noise] ratio must be in [0,1]");
    }
    if (n.kind != NoiseSpec::Kind::Asymmetric && !n.groups.empty()) {
        throw ConfigError("[noise] groups only apply to asymmetric noise");
    }
    if (n.kind == NoiseSpec::Kind::Asymmetric && !n.groups.empty()) {
        circular_flip_map(d.classes, n.groups);  // structural check, result unused
    }

    const TrainConfig& t = cfg.train;
    if (t.e_warm < 0) throw ConfigError("[train] e_warm must be >= 0");
    if (t.e_max < 1) throw ConfigError("[train] e_max must be >= 1");
    if (t.e_warm >= t.e_max) throw ConfigError("[train] e_warm must be < e_max");
    if (t.batch_size < 2) throw ConfigError("[train] batch_size must be >= 2");
    if (!(t.base_lr > 0.0)) throw ConfigError("[train] lr must be > 0");
    if (!(t.momentum >= 0.0 && t.momentum < 1.0)) {
        throw ConfigError("[train] momentum must be in [0,1)");
    }
    if (t.weight_decay < 0.0) throw ConfigError("[train] weight_decay must be >= 0");
    if (t.gamma_delta < 1) throw ConfigError("[train] gamma_delta must be >= 1");
    if (t.hidden.empty()) throw ConfigError("[train] hidden must list at least one width");
    for (int h : t.hidden) {
        if (h < 1) throw ConfigError("[train] hidden widths must be >= 1");
    }
    if (!(t.schedule.decay > 0.0)) throw ConfigError("[train] decay must be > 0");
    for (int ms : t.schedule.milestones) {
        if (ms < 1) throw ConfigError("[train] milestones must be >= 1");
    }
    if (t.checkpoint_interval < 0) {
        throw ConfigError("[train] checkpoint_interval must be >= 0");
    }

    const SslConfig& s = t.ssl;
    if (!(s.tau >= 0.0 && s.tau <= 1.0)) throw ConfigError("[ssl] tau must be in [0,1]");
    if (s.lambda_u < 0.0) throw ConfigError("[ssl] lambda_u must be >= 0");
    if (s.lambda_c < 0.0) throw ConfigError("[ssl] lambda_c must be >= 0");
    if (!(s.mixup_alpha > 0.0)) throw ConfigError("[ssl] mixup_alpha must be > 0");
    if (!(s.temperature > 0.0)) throw ConfigError("[ssl] temperature must be > 0");
    if (s.weak_noise_sigma < 0.0) {
        throw ConfigError("[ssl] weak_noise_sigma must be >= 0");
    }
    if (s.strong_noise_sigma < 0.0) {
        throw ConfigError("[ssl] strong_noise_sigma must be >= 0");
    }
    if (!(s.strong_dropout_p >= 0.0 && s.strong_dropout_p <= 1.0)) {
        throw ConfigError("[ssl] strong_dropout_p must be in [0,1]");
    }
    if (s.unlabeled_ratio < 0) throw ConfigError("[ssl] unlabeled_ratio must be >= 0");

    if (cfg.ablation.variants.empty()) {
        throw ContractError("variant list not materialized");
    }
}

}  // namespace

FullConfig parse_config_text(const std::string& text) {
    FullConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ParseError("config line " + std::to_string(lineno) +
                                 ": unterminated section header");
            }
            section = trim(t.substr(1, t.size() - 2));
            if (section != "data" && section != "noise" && section != "train" &&
                section != "ssl" && section != "ablation") {
                throw ConfigError("unknown config section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(lineno) +
                             ": expected key=value");
        }
        if (section.empty()) {
            throw ParseError("config line " + std::to_string(lineno) +
                             ": key before any [section]");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (!seen.insert(section + "." + key).second) {
            throw ConfigError("duplicate key '" + key + "' in [" + section + "]");
        }

        if (section == "data") {
            if (key == "source_path") cfg.data.source_path = value;
            else if (key == "classes") cfg.data.classes = static_cast<int>(parse_int(section, key, value));
            else if (key == "per_class") cfg.data.per_class = static_cast<int>(parse_int(section, key, value));
            else if (key == "dim") cfg.data.dim = static_cast<int>(parse_int(section, key, value));
            else if (key == "separation") cfg.data.separation = parse_double(section, key, value);
            else if (key == "seed") cfg.data.seed = parse_u64(section, key, value);
            else if (key == "test_per_class") cfg.data.test_per_class = static_cast<int>(parse_int(section, key, value));
            else throw ConfigError("unknown key '" + key + "' in [data]");
        } else if (section == "noise") {
            if (key == "kind") cfg.noise.kind = noise_kind_from_string(value);
            else if (key == "ratio") cfg.noise.ratio = parse_double(section, key, value);
            else if (key == "seed") cfg.noise.seed = parse_u64(section, key, value);
            else if (key == "groups") {
                cfg.noise.groups.clear();
                for (const std::string& g : split_on(value, ';')) {
                    cfg.noise.groups.push_back(parse_int_list(section, key, g));
                }
            } else {
                throw ConfigError("unknown key '" + key + "' in [noise]");
            }
        } else if (section == "train") {
            if (key == "e_warm") cfg.train.e_warm = static_cast<int>(parse_int(section, key, value));
            else if (key == "e_max") cfg.train.e_max = static_cast<int>(parse_int(section, key, value));
            else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_int(section, key, value));
            else if (key == "lr") cfg.train.base_lr = parse_double(section, key, value);
            else if (key == "momentum") cfg.train.momentum = parse_double(section, key, value);
            else if (key == "weight_decay") cfg.train.weight_decay = parse_double(section, key, value);
            else if (key == "schedule") {
                if (value == "cosine") cfg.train.schedule.kind = LrSchedule::Kind::Cosine;
                else if (value == "multistep") cfg.train.schedule.kind = LrSchedule::Kind::Multistep;
                else bad_value(section, key, "expected cosine or multistep");
            }
            else if (key == "milestones") cfg.train.schedule.milestones = parse_int_list(section, key, value);
            else if (key == "decay") cfg.train.schedule.decay = parse_double(section, key, value);
            else if (key == "gamma_delta") cfg.train.gamma_delta = static_cast<int>(parse_int(section, key, value));
            else if (key == "hidden") cfg.train.hidden = parse_int_list(section, key, value);
            else if (key == "seed") cfg.train.seed = parse_u64(section, key, value);
            else if (key == "checkpoint_interval") cfg.train.checkpoint_interval = static_cast<int>(parse_int(section, key, value));
            else throw ConfigError("unknown key '" + key + "' in [train]");
        } else if (section == "ssl") {
            SslConfig& s = cfg.train.ssl;
            if (key == "tau") s.tau = parse_double(section, key, value);
            else if (key == "lambda_u") s.lambda_u = parse_double(section, key, value);
            else if (key == "lambda_c") s.lambda_c = parse_double(section, key, value);
            else if (key == "mixup_alpha") s.mixup_alpha = parse_double(section, key, value);
            else if (key == "temperature") s.temperature = parse_double(section, key, value);
            else if (key == "weak_noise_sigma") s.weak_noise_sigma = parse_double(section, key, value);
            else if (key == "strong_noise_sigma") s.strong_noise_sigma = parse_double(section, key, value);
            else if (key == "strong_dropout_p") s.strong_dropout_p = parse_double(section, key, value);
            else if (key == "unlabeled_ratio") s.unlabeled_ratio = static_cast<int>(parse_int(section, key, value));
            else throw ConfigError("unknown key '" + key + "' in [ssl]");
        } else {  // ablation
            if (key == "variant") cfg.train.variant = variant_from_string(value);
            else if (key == "variants") {
                cfg.ablation.variants.clear();
                for (const std::string& name : split_on(value, ',')) {
                    cfg.ablation.variants.push_back(variant_from_string(name));
                }
            } else {
                throw ConfigError("unknown key '" + key + "' in [ablation]");
            }
        }
    }
    if (cfg.ablation.variants.empty()) cfg.ablation.variants = all_variants();
    validate(cfg);
    return cfg;
}

FullConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string echo_config(const FullConfig& cfg) {
    std::ostringstream out;
    out << "[data]\n";
    out << "source_path=" << cfg.data.source_path << '\n';
    out << "classes=" << cfg.data.classes << '\n';
    out << "per_class=" << cfg.data.per_class << '\n';
    out << "dim=" << cfg.data.dim << '\n';
    out << "separation=" << format_double(cfg.data.separation) << '\n';
    out << "seed=" << cfg.data.seed << '\n';
    out << "test_per_class=" << cfg.data.test_per_class << '\n';

    out << "[noise]\n";
    out << "kind=" << to_string(cfg.noise.kind) << '\n';
    out << "ratio=" << format_double(cfg.noise.ratio) << '\n';
    out << "seed=" << cfg.noise.seed << '\n';
    out << "groups=";
    for (std::size_t i = 0; i < cfg.noise.groups.size(); ++i) {
        if (i > 0) out << ';';
        out << join_ints(cfg.noise.groups[i]);
    }
    out << '\n';

    const TrainConfig& t = cfg.train;
    out << "[train]\n";
    out << "e_warm=" << t.e_warm << '\n';
    out << "e_max=" << t.e_max << '\n';
    out << "batch_size=" << t.batch_size << '\n';
    out << "lr=" << format_double(t.base_lr) << '\n';
    out << "momentum=" << format_double(t.momentum) << '\n';
    out << "weight_decay=" << format_double(t.weight_decay) << '\n';
    out << "schedule="
        << (t.schedule.kind == LrSchedule::Kind::Cosine ? "cosine" : "multistep")
        << '\n';
    out << "milestones=" << join_ints(t.schedule.milestones) << '\n';
    out << "decay=" << format_double(t.schedule.decay) << '\n';
    out << "gamma_delta=" << t.gamma_delta << '\n';
    out << "hidden=" << join_ints(t.hidden) << '\n';
    out << "seed=" << t.seed << '\n';
    out << "checkpoint_interval=" << t.checkpoint_interval << '\n';

    const SslConfig& s = t.ssl;
    out << "[ssl]\n";
    out << "tau=" << format_double(s.tau) << '\n';
    out << "lambda_u=" << format_double(s.lambda_u) << '\n';
    out << "lambda_c=" << format_double(s.lambda_c) << '\n';
    out << "mixup_alpha=" << format_double(s.mixup_alpha) << '\n';
    out << "temperature=" << format_double(s.temperature) << '\n';
    out << "weak_noise_sigma=" << format_double(s.weak_noise_sigma) << '\n';
    out << "strong_noise_sigma=" << format_double(s.strong_noise_sigma) << '\n';
    out << "strong_dropout_p=" << format_double(s.strong_dropout_p) << '\n';
    out << "unlabeled_ratio=" << s.unlabeled_ratio << '\n';

    out << "[ablation]\n";
    out << "variant=" << to_string(t.variant) << '\n';
    out << "variants=";
    for (std::size_t i = 0; i < cfg.ablation.variants.size(); ++i) {
        if (i > 0) out << ',';
        out << to_string(cfg.ablation.variants[i]);
    }
    out << '\n';
    return out.str();
}

}  // namespace crosssplit
