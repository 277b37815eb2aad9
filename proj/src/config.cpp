#include "symreach/config.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace symreach::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
}

double parse_double(const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) throw std::invalid_argument("expected a number, got '" + text + "'");
    return v;
}

template <typename Int>
Int parse_integer(const std::string& text) {
    const std::string t = trim(text);
    Int v{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw std::invalid_argument("expected an integer, got '" + text + "'");
    return v;
}

bool parse_bool(const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw std::invalid_argument("expected true or false, got '" + text + "'");
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <std::size_t N>
std::array<double, N> parse_array(const std::string& text) {
    const auto items = split(text, ',');
    if (items.size() != N)
        throw std::invalid_argument("expected " + std::to_string(N) + " comma-separated numbers, got '" + text + "'");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = parse_double(items[i]);
    return out;
}

template <typename Range>
std::string join(const Range& values, auto&& fmt) {
    std::string out;
    for (const auto& v : values) {
        if (!out.empty()) out += ',';
        out += fmt(v);
    }
    return out;
}

struct Entry {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

// Builds get/set for a field reached through `ref`.
template <typename T, typename Ref, typename Parse, typename Format>
Entry field(std::string key, Ref ref, Parse parse, Format format) {
    return {std::move(key),
            [ref, format](const RunConfig& c) { return format(ref(const_cast<RunConfig&>(c))); },
            [ref, parse](RunConfig& c, const std::string& v) { ref(c) = static_cast<T>(parse(v)); }};
}

template <typename Ref>
Entry real(std::string key, Ref ref) {
    return field<double>(std::move(key), ref, parse_double, format_double);
}

template <typename Ref>
Entry integer(std::string key, Ref ref) {
    using T = std::remove_reference_t<decltype(ref(std::declval<RunConfig&>()))>;
    return field<T>(std::move(key), ref, parse_integer<T>, [](T v) { return std::to_string(v); });
}

template <std::size_t N, typename Ref>
Entry array(std::string key, Ref ref) {
    return field<std::array<double, N>>(std::move(key), ref, parse_array<N>,
                                        [](const std::array<double, N>& a) { return join(a, format_double); });
}

template <typename Ref>
Entry joint_vector(std::string key, Ref ref) {
    return {std::move(key),
            [ref](const RunConfig& c) {
                const robot::JointVector& v = ref(const_cast<RunConfig&>(c));
                return join(std::array<double, 4>{v[0], v[1], v[2], v[3]}, format_double);
            },
            [ref](RunConfig& c, const std::string& text) {
                const auto a = parse_array<4>(text);
                ref(c) = robot::JointVector(a[0], a[1], a[2], a[3]);
            }};
}

template <typename Ref>
Entry hidden_sizes(std::string key, Ref ref) {
    return {std::move(key),
            [ref](const RunConfig& c) {
                return join(ref(const_cast<RunConfig&>(c)), [](int v) { return std::to_string(v); });
            },
            [ref](RunConfig& c, const std::string& text) {
                std::vector<int> sizes;
                for (const auto& item : split(text, ',')) sizes.push_back(parse_integer<int>(item));
                if (sizes.empty()) throw std::invalid_argument("need at least one hidden layer");
                ref(c) = sizes;
            }};
}

template <std::size_t I>
Entry joint_limit(std::string key) {
    return {std::move(key),
            [](const RunConfig& c) {
                const auto& l = c.env.robot.joint_limits;
                return join(std::array<double, 4>{I ? l[0].hi : l[0].lo, I ? l[1].hi : l[1].lo,
                                                  I ? l[2].hi : l[2].lo, I ? l[3].hi : l[3].lo},
                            format_double);
            },
            [](RunConfig& c, const std::string& text) {
                const auto a = parse_array<4>(text);
                for (std::size_t j = 0; j < 4; ++j) (I ? c.env.robot.joint_limits[j].hi : c.env.robot.joint_limits[j].lo) = a[j];
            }};
}

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> e;
        e.push_back({"run.task", [](const RunConfig& c) { return std::string(env::to_string(c.task)); },
                     [](RunConfig& c, const std::string& v) { c.task = env::parse_task(trim(v)); }});
        e.push_back(integer("run.seed", [](RunConfig& c) -> auto& { return c.seed; }));
        e.push_back(integer("run.n_trials", [](RunConfig& c) -> auto& { return c.n_trials; }));

        e.push_back(real("robot.base_height", [](RunConfig& c) -> auto& { return c.env.robot.base_height; }));
        e.push_back(array<3>("robot.link_lengths", [](RunConfig& c) -> auto& { return c.env.robot.link_lengths; }));
        e.push_back(joint_limit<0>("robot.joint_lower"));
        e.push_back(joint_limit<1>("robot.joint_upper"));
        e.push_back(real("robot.vel_limit", [](RunConfig& c) -> auto& { return c.env.robot.vel_limit; }));
        e.push_back(array<4>("robot.tau_max", [](RunConfig& c) -> auto& { return c.env.robot.tau_max; }));
        e.push_back(array<4>("robot.link_masses", [](RunConfig& c) -> auto& { return c.env.robot.link_masses; }));
        e.push_back(array<4>("robot.damping", [](RunConfig& c) -> auto& { return c.env.robot.damping; }));
        e.push_back(real("robot.dt", [](RunConfig& c) -> auto& { return c.env.robot.dt; }));
        e.push_back(real("robot.velocity_time_constant",
                         [](RunConfig& c) -> auto& { return c.env.robot.velocity_time_constant; }));
        e.push_back(real("robot.gravity", [](RunConfig& c) -> auto& { return c.env.robot.gravity; }));

        e.push_back(integer("workspace.partitions", [](RunConfig& c) -> auto& { return c.env.workspace.partitions; }));
        e.push_back(real("workspace.rho_min", [](RunConfig& c) -> auto& { return c.env.workspace.rho_min; }));
        e.push_back(real("workspace.rho_max", [](RunConfig& c) -> auto& { return c.env.workspace.rho_max; }));
        e.push_back(real("workspace.z_min", [](RunConfig& c) -> auto& { return c.env.workspace.z_min; }));
        e.push_back(real("workspace.z_max", [](RunConfig& c) -> auto& { return c.env.workspace.z_max; }));
        e.push_back({"workspace.boundary",
                     [](const RunConfig& c) {
                         return std::string(c.env.workspace.boundary == env::Boundary::Box ? "box" : "disc");
                     },
                     [](RunConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "box") c.env.workspace.boundary = env::Boundary::Box;
                         else if (t == "disc") c.env.workspace.boundary = env::Boundary::Disc;
                         else throw std::invalid_argument("expected box or disc, got '" + v + "'");
                     }});
        e.push_back(real("workspace.extent", [](RunConfig& c) -> auto& { return c.env.workspace.extent; }));

        e.push_back(real("reward.alpha_distance", [](RunConfig& c) -> auto& { return c.env.reward.alpha_distance; }));
        e.push_back(real("reward.alpha_effort", [](RunConfig& c) -> auto& { return c.env.reward.alpha_effort; }));
        e.push_back(real("reward.reach_bonus", [](RunConfig& c) -> auto& { return c.env.reward.reach_bonus; }));
        e.push_back(real("reward.collision_penalty",
                         [](RunConfig& c) -> auto& { return c.env.reward.collision_penalty; }));
        e.push_back(real("reward.epsilon", [](RunConfig& c) -> auto& { return c.env.reward.epsilon; }));

        e.push_back(real("obstacle.half_size", [](RunConfig& c) -> auto& { return c.env.obstacle_half_size; }));
        e.push_back(real("obstacle.collision_margin", [](RunConfig& c) -> auto& { return c.env.collision_margin; }));

        e.push_back(joint_vector("pid.kp", [](RunConfig& c) -> auto& { return c.demo.gains.kp; }));
        e.push_back(joint_vector("pid.ki", [](RunConfig& c) -> auto& { return c.demo.gains.ki; }));
        e.push_back(joint_vector("pid.kd", [](RunConfig& c) -> auto& { return c.demo.gains.kd; }));
        e.push_back(real("pid.integral_limit", [](RunConfig& c) -> auto& { return c.demo.gains.integral_limit; }));
        e.push_back(real("pid.switch_tolerance", [](RunConfig& c) -> auto& { return c.demo.plan.switch_tolerance; }));
        e.push_back(real("pid.clearance", [](RunConfig& c) -> auto& { return c.demo.plan.clearance; }));
        e.push_back({"pid.discard_failed", [](const RunConfig& c) { return std::string(c.demo.discard_failed ? "true" : "false"); },
                     [](RunConfig& c, const std::string& v) { c.demo.discard_failed = parse_bool(v); }});

        e.push_back(real("train.gamma", [](RunConfig& c) -> auto& { return c.train.gamma; }));
        e.push_back(real("train.sigma", [](RunConfig& c) -> auto& { return c.train.sigma; }));
        e.push_back(real("train.lambda_bc", [](RunConfig& c) -> auto& { return c.train.lambda_bc; }));
        e.push_back(integer("train.n_demos", [](RunConfig& c) -> auto& { return c.train.n_demos; }));
        e.push_back(integer("train.n_ep", [](RunConfig& c) -> auto& { return c.train.n_ep; }));
        e.push_back(integer("train.episodes_per_epoch", [](RunConfig& c) -> auto& { return c.train.episodes_per_epoch; }));
        e.push_back(integer("train.n_up", [](RunConfig& c) -> auto& { return c.train.n_up; }));
        e.push_back(integer("train.n_tau", [](RunConfig& c) -> auto& { return c.train.n_tau; }));
        e.push_back(integer("train.batch_o", [](RunConfig& c) -> auto& { return c.train.batch_o; }));
        e.push_back(integer("train.batch_d", [](RunConfig& c) -> auto& { return c.train.batch_d; }));
        e.push_back(integer("train.buffer_o", [](RunConfig& c) -> auto& { return c.train.buffer_o; }));
        e.push_back(real("train.lr_actor", [](RunConfig& c) -> auto& { return c.train.lr_actor; }));
        e.push_back(real("train.lr_critic", [](RunConfig& c) -> auto& { return c.train.lr_critic; }));
        e.push_back(real("train.omega", [](RunConfig& c) -> auto& { return c.train.omega; }));
        e.push_back(hidden_sizes("train.actor_hidden", [](RunConfig& c) -> auto& { return c.train.actor_hidden; }));
        e.push_back(hidden_sizes("train.critic_hidden", [](RunConfig& c) -> auto& { return c.train.critic_hidden; }));
        e.push_back(real("train.final_layer_scale", [](RunConfig& c) -> auto& { return c.train.final_layer_scale; }));
        e.push_back(real("train.target_min", [](RunConfig& c) -> auto& { return c.train.target_min; }));
        e.push_back(real("train.target_max", [](RunConfig& c) -> auto& { return c.train.target_max; }));
        e.push_back({"train.granularity",
                     [](const RunConfig& c) {
                         return std::string(c.train.granularity == agent::UpdateGranularity::Steps ? "steps"
                                                                                                   : "episodes");
                     },
                     [](RunConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "steps") c.train.granularity = agent::UpdateGranularity::Steps;
                         else if (t == "episodes") c.train.granularity = agent::UpdateGranularity::Episodes;
                         else throw std::invalid_argument("expected steps or episodes, got '" + v + "'");
                     }});

        e.push_back({"paths.demo_file", [](const RunConfig& c) { return c.paths.demo_file; },
                     [](RunConfig& c, const std::string& v) { c.paths.demo_file = trim(v); }});
        e.push_back({"paths.checkpoint", [](const RunConfig& c) { return c.paths.checkpoint; },
                     [](RunConfig& c, const std::string& v) { c.paths.checkpoint = trim(v); }});
        return e;
    }();
    return entries;
}

const Entry& find_entry(const std::string& key) {
    for (const auto& e : registry())
        if (e.key == key) return e;
    throw ConfigError("unknown config key '" + key + "'");
}

void set_grid(RunConfig& c, env::TaskKind task, double lambda_bc, int n_demos) {
    apply_preset(c, task == env::TaskKind::P2P ? "p2p-full" : "p2po-full");
    c.train.lambda_bc = lambda_bc;
    c.train.n_demos = n_demos;
}

}  // namespace

env::EnvParams RunConfig::env_params() const {
    env::EnvParams p = env;
    p.max_steps = train.n_tau;
    return p;
}

void RunConfig::validate() const {
    auto guard = [](const char* section, auto&& check) {
        try {
            check();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string(section) + ": " + e.what());
        }
    };
    if (n_trials <= 0) throw ConfigError("run.n_trials must be positive");
    guard("robot/workspace/reward", [&] { env_params().validate(); });
    guard("pid", [&] { demo.gains.validate(); });
    guard("train", [&] { train.validate(); });
    if (demo.plan.switch_tolerance <= 0.0) throw ConfigError("pid.switch_tolerance must be positive");
    if (env.workspace.partitions != 4) throw ConfigError("workspace.partitions must be 4 (quarter-turn symmetry)");
}

std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    for (const auto& e : registry()) keys.push_back(e.key);
    return keys;
}

void set_value(RunConfig& config, const std::string& key, const std::string& value) {
    const Entry& e = find_entry(key);
    try {
        e.set(config, value);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError(key + ": " + ex.what());
    }
}

std::string get_value(const RunConfig& config, const std::string& key) { return find_entry(key).get(config); }

void load_file(RunConfig& config, const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("cannot read config " + path.string() + ": " + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError(path.string() + ": key '" + section + "' outside any section");
        for (const auto& [name, value] : body) set_value(config, section + "." + name, value.data());
    }
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + a + "' is not of the form section.key=value");
        set_value(config, trim(a.substr(0, eq)), a.substr(eq + 1));
    }
}

std::vector<std::string> preset_names() {
    return {"p2p-full",  "p2po-full",  "p2p-bc0.1",     "p2p-bc0.6",     "p2p-bc1.8",     "p2p-demos0",
            "p2p-demos80", "p2p-demos160", "p2p-ddpg",     "p2po-bc0.5",    "p2po-bc1",      "p2po-bc2",
            "p2po-demos100", "p2po-demos200", "p2po-demos400", "p2po-ddpg", "p2p-desk"};
}

void apply_preset(RunConfig& c, const std::string& name) {
    using env::TaskKind;
    if (name == "p2p-full") {
        c.task = TaskKind::P2P;
        c.train.n_tau = 400;
        c.train.n_ep = 250;
        c.train.episodes_per_epoch = 10;
        c.train.n_up = 20;
        c.train.n_demos = 80;
        c.train.lambda_bc = 1.0;
    } else if (name == "p2po-full") {
        c.task = TaskKind::P2PO;
        c.train.n_tau = 500;
        c.train.n_ep = 500;
        c.train.episodes_per_epoch = 5;
        c.train.n_up = 25;
        c.train.n_demos = 250;
        c.train.lambda_bc = 1.0;
    } else if (name == "p2p-bc0.1") set_grid(c, TaskKind::P2P, 0.1, 100);
    else if (name == "p2p-bc0.6") set_grid(c, TaskKind::P2P, 0.6, 100);
    else if (name == "p2p-bc1.8") set_grid(c, TaskKind::P2P, 1.8, 100);
    else if (name == "p2p-demos0") set_grid(c, TaskKind::P2P, 1.0, 0);
    else if (name == "p2p-demos80") set_grid(c, TaskKind::P2P, 1.0, 80);
    else if (name == "p2p-demos160") set_grid(c, TaskKind::P2P, 1.0, 160);
    else if (name == "p2p-ddpg") set_grid(c, TaskKind::P2P, 0.0, 0);
    else if (name == "p2po-bc0.5") set_grid(c, TaskKind::P2PO, 0.5, 250);
    else if (name == "p2po-bc1") set_grid(c, TaskKind::P2PO, 1.0, 250);
    else if (name == "p2po-bc2") set_grid(c, TaskKind::P2PO, 2.0, 250);
    else if (name == "p2po-demos100") set_grid(c, TaskKind::P2PO, 1.0, 100);
    else if (name == "p2po-demos200") set_grid(c, TaskKind::P2PO, 1.0, 200);
    else if (name == "p2po-demos400") set_grid(c, TaskKind::P2PO, 1.0, 400);
    else if (name == "p2po-ddpg") set_grid(c, TaskKind::P2PO, 0.0, 0);
    else if (name == "p2p-desk") {
        // Reduced P2P run: 400 episodes of 100 steps, 40 demos, small networks.
        // Shorter horizon and targets clipped to the reward range keep the
        // small critic from overestimating; applies to every arm alike.
        c.task = TaskKind::P2P;
        c.train.n_tau = 100;
        c.train.gamma = 0.95;
        c.train.target_min = -10.0;
        c.train.target_max = 10.0;
        c.train.n_ep = 40;
        c.train.episodes_per_epoch = 10;
        c.train.n_up = 20;
        c.train.n_demos = 40;
        c.train.lambda_bc = 1.0;
        c.train.actor_hidden = {64, 64};
        c.train.critic_hidden = {64, 64};
        c.n_trials = 100;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
}

std::string snapshot(const RunConfig& config) {
    std::string out;
    std::string section;
    for (const auto& e : registry()) {
        const auto dot = e.key.find('.');
        const std::string s = e.key.substr(0, dot);
        if (s != section) {
            if (!section.empty()) out += '\n';
            out += "[" + s + "]\n";
            section = s;
        }
        out += e.key.substr(dot + 1) + " = " + e.get(config) + "\n";
    }
    return out;
}

}  // namespace symreach::config
