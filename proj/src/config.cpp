#include "qcdirac/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "qcdirac/errors.hpp"

namespace qcdirac {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers can be reported.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    std::string where(const std::string& key = "") const {
        if (key.empty()) return path_.empty() ? "config" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    double number(const std::string& key, double def) {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError("field " + where(key) + ": expected a number");
        return v.get<double>();
    }

    std::uint64_t count(const std::string& key, std::uint64_t def) {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
            throw ConfigError("field " + where(key) + ": expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    int integer(const std::string& key, int def) {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError("field " + where(key) + ": expected an integer");
        return v.get<int>();
    }

    bool boolean(const std::string& key, bool def) {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError("field " + where(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& def) {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_string()) throw ConfigError("field " + where(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::string choice(const std::string& key, const std::string& def, std::initializer_list<const char*> options) {
        const std::string s = text(key, def);
        for (const char* o : options)
            if (s == o) return s;
        std::string msg = "field " + where(key) + ": '" + s + "' is not one of";
        for (const char* o : options) msg += std::string(" ") + o;
        throw ConfigError(msg);
    }

    std::vector<double> numbers(const std::string& key) {
        if (!has(key)) return {};
        const json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError("field " + where(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError("field " + where(key) + ": expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& key, std::vector<std::string> def) {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError("field " + where(key) + ": expected an array of strings");
        std::vector<std::string> out;
        for (const auto& x : v) {
            if (!x.is_string()) throw ConfigError("field " + where(key) + ": expected an array of strings");
            out.push_back(x.get<std::string>());
        }
        return out;
    }

    json raw(const std::string& key, json def) {
        if (!has(key)) return def;
        return j_.at(key);
    }

    Section sub(const std::string& key) {
        static const json empty = json::object();
        if (!has(key)) return Section(empty, where(key));
        return Section(j_.at(key), where(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("field " + where(it.key()) + ": unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

const char* scheme_name(Scheme s) { return s == Scheme::rk4 ? "rk4" : "velocity-verlet-projected"; }
const char* mode_name(FrequencyMode m) { return m == FrequencyMode::literal ? "literal" : "projected"; }

}  // namespace

bool RunConfig::operator==(const RunConfig& o) const {
    return config_to_json(*this) == config_to_json(o) && output == o.output;
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    Section root(j, "");
    {
        Section m = root.sub("model");
        c.model = m.text("name", c.model);
        c.model_params = m.raw("params", json::object());
        m.finish();
    }
    {
        Section m = root.sub("constraints");
        c.constraints = m.text("name", c.constraints);
        c.constraint_params = m.raw("params", json::object());
        m.finish();
    }
    c.masses = root.raw("masses", 1.0);
    if (!c.masses.is_number() && !c.masses.is_array()) throw ConfigError("field masses: expected a number or an array");
    {
        Section k = root.sub("constants");
        c.hbar = k.number("hbar", c.hbar);
        c.beta = k.number("beta", c.beta);
        k.finish();
    }
    {
        Section s = root.sub("integrator");
        auto& g = c.integrator;
        g.dt = s.number("dt", g.dt);
        g.scheme = s.choice("scheme", scheme_name(g.scheme), {"rk4", "velocity-verlet-projected"}) == "rk4"
                       ? Scheme::rk4
                       : Scheme::velocity_verlet_projected;
        g.constraint_tol = s.number("constraint_tol", g.constraint_tol);
        g.max_hops = s.integer("max_hops", g.max_hops);
        g.frequency_mode = s.choice("frequency_mode", mode_name(g.frequency_mode), {"literal", "projected"}) == "literal"
                               ? FrequencyMode::literal
                               : FrequencyMode::projected;
        g.hopping = s.boolean("hopping", g.hopping);
        g.project_after_jump = s.boolean("project_after_jump", g.project_after_jump);
        g.gap_floor = s.number("gap_floor", g.gap_floor);
        s.finish();
        try {
            g.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("section integrator: ") + e.what());
        }
    }
    {
        Section s = root.sub("ensemble");
        c.trajectories = s.count("trajectories", c.trajectories);
        s.finish();
    }
    c.seed = root.count("seed", c.seed);
    c.output = root.text("output", c.output);
    {
        Section s = root.sub("propagate");
        auto& p = c.propagate;
        p.t_end = s.number("t_end", p.t_end);
        p.interval = s.number("interval", p.interval);
        p.observables = s.strings("observables", p.observables);
        Section i = s.sub("initial");
        p.initial.kind = i.choice("kind", p.initial.kind, {"stationary", "point"});
        p.initial.surface = i.integer("surface", p.initial.surface);
        p.initial.R = i.numbers("R");
        p.initial.P = i.numbers("P");
        i.finish();
        s.finish();
    }
    {
        Section s = root.sub("sample");
        auto& p = c.sample;
        p.count = s.count("count", p.count);
        p.chains = s.count("chains", p.chains);
        p.burn_in = s.count("burn_in", p.burn_in);
        p.thin = s.count("thin", p.thin);
        p.step = s.number("step", p.step);
        p.fredholm = s.boolean("fredholm", p.fredholm);
        s.finish();
    }
    {
        Section s = root.sub("respond");
        auto& r = c.respond;
        r.B = s.text("B", r.B);
        r.A = s.text("A", r.A);
        r.t_end = s.number("t_end", r.t_end);
        r.interval = s.number("interval", r.interval);
        r.samples = s.count("samples", r.samples);
        r.order_hbar = s.boolean("order_hbar", r.order_hbar);
        Section f = s.sub("force");
        r.force.kind = f.choice("kind", r.force.kind, {"zero", "step", "impulse", "sine"});
        r.force.amplitude = f.number("amplitude", r.force.amplitude);
        r.force.frequency = f.number("frequency", r.force.frequency);
        f.finish();
        s.finish();
    }
    {
        Section s = root.sub("check");
        c.check.points = s.count("points", c.check.points);
        s.finish();
    }
    root.finish();

    if (!(c.hbar > 0.0)) throw ConfigError("field constants.hbar: must be positive");
    if (!(c.beta > 0.0)) throw ConfigError("field constants.beta: must be positive");
    if (c.trajectories == 0) throw ConfigError("field ensemble.trajectories: must be positive");
    return c;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min(e.byte, text.size());
        const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
        throw ConfigError(source + ":" + std::to_string(line) + ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

json config_to_json(const RunConfig& c) {
    const auto& g = c.integrator;
    json j;
    j["model"] = {{"name", c.model}, {"params", c.model_params}};
    j["constraints"] = {{"name", c.constraints}, {"params", c.constraint_params}};
    j["masses"] = c.masses;
    j["constants"] = {{"hbar", c.hbar}, {"beta", c.beta}};
    j["integrator"] = {{"dt", g.dt},
                       {"scheme", scheme_name(g.scheme)},
                       {"constraint_tol", g.constraint_tol},
                       {"max_hops", g.max_hops},
                       {"frequency_mode", mode_name(g.frequency_mode)},
                       {"hopping", g.hopping},
                       {"project_after_jump", g.project_after_jump},
                       {"gap_floor", g.gap_floor}};
    j["ensemble"] = {{"trajectories", c.trajectories}};
    j["seed"] = c.seed;
    const auto& p = c.propagate;
    json init = {{"kind", p.initial.kind}, {"surface", p.initial.surface}};
    if (!p.initial.R.empty()) init["R"] = p.initial.R;
    if (!p.initial.P.empty()) init["P"] = p.initial.P;
    j["propagate"] = {{"t_end", p.t_end}, {"interval", p.interval}, {"observables", p.observables}, {"initial", init}};
    const auto& s = c.sample;
    j["sample"] = {{"count", s.count},     {"chains", s.chains}, {"burn_in", s.burn_in},
                   {"thin", s.thin},       {"step", s.step},     {"fredholm", s.fredholm}};
    const auto& r = c.respond;
    j["respond"] = {{"B", r.B},
                    {"A", r.A},
                    {"t_end", r.t_end},
                    {"interval", r.interval},
                    {"samples", r.samples},
                    {"order_hbar", r.order_hbar},
                    {"force", {{"kind", r.force.kind}, {"amplitude", r.force.amplitude}, {"frequency", r.force.frequency}}}};
    j["check"] = {{"points", c.check.points}};
    return j;
}

std::string config_echo(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

}  // namespace qcdirac
