#include "ncpr/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

extern char** environ;

namespace ncpr {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_tokens(const std::string& s, char extra = '\0') {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',' ||
            (extra != '\0' && ch == extra)) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double parse_double(const std::string& token, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' has non-numeric token '" +
                          token + "'");
    }
}

// p entries -> diagonal, p*p entries -> row-major full matrix.
Eigen::MatrixXd parse_matrix(const std::vector<double>& nums, int dim,
                             const std::string& key) {
    if (static_cast<int>(nums.size()) == dim) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
        for (int i = 0; i < dim; ++i) m(i, i) = nums[static_cast<std::size_t>(i)];
        return m;
    }
    if (static_cast<int>(nums.size()) == dim * dim) {
        Eigen::MatrixXd m(dim, dim);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                m(r, c) = nums[static_cast<std::size_t>(r * dim + c)];
        return m;
    }
    throw ConfigError("config: key '" + key + "' needs " + std::to_string(dim) +
                      " (diagonal) or " + std::to_string(dim * dim) +
                      " (row-major) entries, got " + std::to_string(nums.size()));
}

BoxConstraint parse_box(const std::vector<double>& nums, int q, const std::string& key) {
    if (static_cast<int>(nums.size()) != 2 * q)
        throw ConfigError("config: key '" + key + "' needs " + std::to_string(2 * q) +
                          " entries (lo hi per channel), got " +
                          std::to_string(nums.size()));
    BoxConstraint box{Eigen::VectorXd(q), Eigen::VectorXd(q)};
    for (int j = 0; j < q; ++j) {
        box.lo[j] = nums[static_cast<std::size_t>(2 * j)];
        box.hi[j] = nums[static_cast<std::size_t>(2 * j + 1)];
    }
    box.validate();
    return box;
}

// Semicolon-separated vector list, e.g. "1 2 3 ; 4 5 6".
std::vector<Eigen::VectorXd> parse_vector_list(const std::string& raw, int dim,
                                               const std::string& key) {
    std::vector<Eigen::VectorXd> out;
    std::stringstream ss(raw);
    std::string part;
    while (std::getline(ss, part, ';')) {
        const std::vector<std::string> tokens = split_tokens(part);
        if (tokens.empty()) continue;
        if (static_cast<int>(tokens.size()) != dim)
            throw ConfigError("config: key '" + key + "' case has " +
                              std::to_string(tokens.size()) + " entries, expected " +
                              std::to_string(dim));
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i)
            v[i] = parse_double(tokens[static_cast<std::size_t>(i)], key);
        out.push_back(std::move(v));
    }
    if (out.empty())
        throw ConfigError("config: key '" + key + "' has no entries");
    return out;
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text, const std::string& origin) {
    KvConfig kv;
    kv.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        kv.values_[key] = value;
    }
    return kv;
}

KvConfig KvConfig::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

std::vector<std::string> KvConfig::apply_env_overrides(const std::string& prefix) {
    std::vector<std::string> applied;
    for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
        const std::string entry(*env);
        if (entry.rfind(prefix, 0) != 0) continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string key = entry.substr(prefix.size(), eq - prefix.size());
        // Double underscore encodes the section dot.
        std::size_t pos;
        while ((pos = key.find("__")) != std::string::npos)
            key.replace(pos, 2, ".");
        values_[key] = entry.substr(eq + 1);
        applied.push_back(key);
    }
    std::sort(applied.begin(), applied.end());
    return applied;
}

void KvConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

bool KvConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KvConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError("config: missing required key '" + key + "' in " + origin_);
    return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key) const {
    return parse_double(get_string(key), key);
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long KvConfig::get_int(const std::string& key) const {
    const double v = get_double(key);
    const long n = static_cast<long>(v);
    if (static_cast<double>(n) != v)
        throw ConfigError("config: key '" + key + "' must be an integer");
    return n;
}

long KvConfig::get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<double> KvConfig::get_numbers(const std::string& key) const {
    const std::vector<std::string> tokens = split_tokens(get_string(key));
    std::vector<double> out;
    out.reserve(tokens.size());
    for (const auto& tok : tokens) out.push_back(parse_double(tok, key));
    return out;
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
    ExperimentConfig cfg;
    cfg.plant_type = kv.get_string("plant.type");
    if (cfg.plant_type != "pendulum" && cfg.plant_type != "unicycle")
        throw ConfigError("config: plant.type must be 'pendulum' or 'unicycle'");
    cfg.pendulum_mass = kv.get_double("plant.mass", 1.0);
    cfg.pendulum_length = kv.get_double("plant.length", 1.0);
    cfg.pendulum_gravity = kv.get_double("plant.gravity", 9.81);

    const int p = cfg.plant_type == "pendulum" ? 2 : 3;
    const int q = cfg.plant_type == "pendulum" ? 1 : 2;

    cfg.Q = parse_matrix(kv.get_numbers("cost.Q"), p, "cost.Q");
    cfg.R = parse_matrix(kv.get_numbers("cost.R"), q, "cost.R");
    cfg.S = parse_matrix(kv.get_numbers("cost.S"), p, "cost.S");
    cfg.horizon = static_cast<int>(kv.get_int("cost.horizon"));
    cfg.dt = kv.get_double("cost.dt");
    const std::string reg = kv.get_string("cost.reg", "uniform");
    if (reg == "uniform") {
        cfg.reg = RegKind::Uniform;
        cfg.beta = kv.get_double("cost.beta");
    } else if (reg == "discounted") {
        cfg.reg = RegKind::Discounted;
        cfg.gamma = kv.get_double("cost.gamma");
    } else {
        throw ConfigError("config: cost.reg must be 'uniform' or 'discounted'");
    }

    const std::vector<double> range = kv.get_numbers("train.range");
    if (range.size() == 2) {
        cfg.train_ranges.assign(static_cast<std::size_t>(p), {range[0], range[1]});
    } else if (static_cast<int>(range.size()) == 2 * p) {
        for (int d = 0; d < p; ++d)
            cfg.train_ranges.push_back({range[static_cast<std::size_t>(2 * d)],
                                        range[static_cast<std::size_t>(2 * d + 1)]});
    } else {
        throw ConfigError("config: train.range needs 2 or 2*p entries");
    }
    const std::vector<double> counts = kv.get_numbers("train.count");
    if (counts.size() == 1) {
        cfg.train_counts.assign(static_cast<std::size_t>(p),
                                static_cast<int>(counts[0]));
    } else if (static_cast<int>(counts.size()) == p) {
        for (double c : counts) cfg.train_counts.push_back(static_cast<int>(c));
    } else {
        throw ConfigError("config: train.count needs 1 or p entries");
    }

    cfg.epochs = static_cast<int>(kv.get_int("train.epochs"));
    cfg.learning_rate = kv.get_double("train.lr");
    cfg.constrained = kv.get_bool("train.constrained", false);
    if (cfg.constrained)
        cfg.train_box = parse_box(kv.get_numbers("train.box"), q, "train.box");
    cfg.shuffle = kv.get_bool("train.shuffle", false);
    if (kv.has("train.hidden")) {
        cfg.hidden.clear();
        for (double h : kv.get_numbers("train.hidden"))
            cfg.hidden.push_back(static_cast<int>(h));
    }

    cfg.controller = kv.get_string("controller", "cpnn_unconstrained");
    if (cfg.controller != "cpnn_unconstrained" &&
        cfg.controller != "cpnn_constrained" && cfg.controller != "mpc")
        throw ConfigError("config: controller must be cpnn_unconstrained, "
                          "cpnn_constrained, or mpc");
    if (kv.has("test.box") && kv.get_string("test.box") != "none")
        cfg.test_box = parse_box(kv.get_numbers("test.box"), q, "test.box");

    cfg.z0_list = parse_vector_list(kv.get_string("sim.z0"), p, "sim.z0");
    cfg.z_ref_list = kv.has("sim.z_ref")
                         ? parse_vector_list(kv.get_string("sim.z_ref"), p, "sim.z_ref")
                         : std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(p)};
    if (cfg.z_ref_list.size() != 1 && cfg.z_ref_list.size() != cfg.z0_list.size())
        throw ConfigError("config: sim.z_ref needs one entry or one per sim.z0 case");
    cfg.duration = kv.get_double("sim.duration", 10.0);

    cfg.mpc.horizon = static_cast<int>(kv.get_int("mpc.horizon", cfg.horizon));
    cfg.mpc.max_iters = static_cast<int>(kv.get_int("mpc.max_iters", 300));
    cfg.mpc.step_size = kv.get_double("mpc.step_size", 0.05);
    cfg.mpc.tolerance = kv.get_double("mpc.tolerance", 1e-8);
    cfg.mpc.warm_start = kv.get_bool("mpc.warm_start", true);

    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
    cfg.out_dir = kv.get_string("out.dir", "runs/out");
    return cfg;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
    KvConfig kv = KvConfig::load_file(path);
    kv.apply_env_overrides();
    return from_kv(kv);
}

std::unique_ptr<PlantModel> ExperimentConfig::make_plant() const {
    if (plant_type == "pendulum")
        return std::make_unique<PendulumModel>(pendulum_mass, pendulum_length,
                                               pendulum_gravity);
    return std::make_unique<UnicycleModel>();
}

CostSpec ExperimentConfig::cost_spec() const {
    CostSpec spec;
    spec.Q = Q;
    spec.R = R;
    spec.S = S;
    spec.horizon = horizon;
    spec.dt = dt;
    spec.reg = reg;
    spec.beta = beta;
    spec.gamma = gamma;
    return spec;
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig tc;
    tc.ranges = train_ranges;
    tc.counts = train_counts;
    tc.epochs = epochs;
    tc.learning_rate = learning_rate;
    tc.constrained = constrained;
    if (train_box) tc.box = *train_box;
    tc.seed = seed;
    tc.shuffle = shuffle;
    tc.hidden = hidden;
    return tc;
}

const Eigen::VectorXd& ExperimentConfig::z_ref_for_case(std::size_t i) const {
    return z_ref_list.size() == 1 ? z_ref_list.front() : z_ref_list.at(i);
}

const BoxConstraint* ExperimentConfig::box_for_controller(const std::string& kind) const {
    if (kind == "cpnn_unconstrained") return nullptr;
    if (!test_box)
        throw ConfigError("config: controller '" + kind + "' needs test.box");
    return &*test_box;
}

}  // namespace ncpr
