#include "asyncfv/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "asyncfv/io.hpp"

namespace asyncfv {

ConfigError::ConfigError(std::string field, int line, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string{}) +
                         (field.empty() ? std::string{} : field + ": ") + message),
      field_(std::move(field)),
      line_(line) {}

SchemeConfig RunConfig::scheme() const {
    auto cfg = scheme_config(experiment, variant, delta_m);
    cfg.cascade_threshold = cascade_threshold;
    cfg.trace = trace;
    return cfg;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"experiment",
         {"name", "scale", "nx", "ny", "nz", "lx", "ly", "lz", "diffusivity", "vx", "vy", "vz", "initial", "source_x",
          "source_y", "source_z", "source_value", "fracture", "fracture_d", "matrix_d", "seed", "reaction",
          "final_time", "reference_tol", "reference_method"}},
        {"scheme", {"variant", "delta_m", "schemes", "ladder", "cascade_threshold", "max_events", "trace"}},
        {"output", {"dir", "verbosity"}},
    };
    return keys;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Entry {
    std::string value;
    int line = 0;
};

class Values {
public:
    std::map<std::string, Entry> entries;

    bool has(const std::string& f) const { return entries.count(f) != 0; }

    double number(const std::string& f) const {
        const auto& e = entries.at(f);
        double v = 0.0;
        const char* end = e.value.data() + e.value.size();
        auto [p, ec] = std::from_chars(e.value.data(), end, v);
        if (ec != std::errc{} || p != end) {
            throw ConfigError(f, e.line, "expected a number, got '" + e.value + "'");
        }
        return v;
    }

    std::int64_t integer(const std::string& f) const {
        const auto& e = entries.at(f);
        std::int64_t v = 0;
        const char* end = e.value.data() + e.value.size();
        auto [p, ec] = std::from_chars(e.value.data(), end, v);
        if (ec != std::errc{} || p != end) {
            throw ConfigError(f, e.line, "expected an integer, got '" + e.value + "'");
        }
        return v;
    }

    bool boolean(const std::string& f) const {
        const auto& e = entries.at(f);
        if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
        if (e.value == "false" || e.value == "0" || e.value == "no") return false;
        throw ConfigError(f, e.line, "expected true or false, got '" + e.value + "'");
    }

    const std::string& text(const std::string& f) const { return entries.at(f).value; }
    int line(const std::string& f) const { return has(f) ? entries.at(f).line : 0; }

    std::vector<std::string> list(const std::string& f) const {
        std::vector<std::string> out;
        std::stringstream ss(text(f));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) {
                throw ConfigError(f, line(f), "empty list item");
            }
            out.push_back(item);
        }
        return out;
    }

    int positive_int(const std::string& f) const {
        const auto v = integer(f);
        if (v < 1 || v > 1'000'000) {
            throw ConfigError(f, line(f), "must be a positive integer");
        }
        return static_cast<int>(v);
    }

    double positive(const std::string& f) const {
        const double v = number(f);
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(f, line(f), "must be > 0, got " + text(f));
        }
        return v;
    }
};

Values tokenize(const std::string& text) {
    Values vals;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto hash = raw.find_first_of("#;");
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("", lineno, "malformed section header '" + line + "'");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (!known_keys().count(section)) {
                throw ConfigError(section, lineno, "unknown section");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", lineno, "expected key = value, got '" + line + "'");
        }
        if (section.empty()) {
            throw ConfigError("", lineno, "key outside of any section");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string field = section + "." + key;
        if (!known_keys().at(section).count(key)) {
            throw ConfigError(field, lineno, "unknown key");
        }
        if (vals.has(field)) {
            throw ConfigError(field, lineno, "duplicate key (first set on line " +
                                                 std::to_string(vals.line(field)) + ")");
        }
        vals.entries[field] = {trim(line.substr(eq + 1)), lineno};
    }
    return vals;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    const Values v = tokenize(text);
    RunConfig rc;
    rc.echo = text;
    rc.hash = Hasher{}.text(text).digest();

    if (v.has("experiment.scale")) {
        try {
            rc.scale = parse_scale(v.text("experiment.scale"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("experiment.scale", v.line("experiment.scale"), e.what());
        }
    }
    const std::string name = v.has("experiment.name") ? v.text("experiment.name") : "custom";
    if (name == "custom") {
        rc.experiment = ExperimentSpec{};
        rc.experiment.dims = {1, 1, 1};
        rc.experiment.ladder = {1e-4, 1e-5, 1e-6};
    } else {
        try {
            rc.experiment = experiment_by_name(name, rc.scale);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("experiment.name", v.line("experiment.name"), e.what());
        }
    }
    auto& ex = rc.experiment;

    if (v.has("experiment.nx")) ex.dims.nx = v.positive_int("experiment.nx");
    if (v.has("experiment.ny")) ex.dims.ny = v.positive_int("experiment.ny");
    if (v.has("experiment.nz")) ex.dims.nz = v.positive_int("experiment.nz");
    if (v.has("experiment.lx")) ex.extent.x = v.positive("experiment.lx");
    if (v.has("experiment.ly")) ex.extent.y = v.positive("experiment.ly");
    if (v.has("experiment.lz")) ex.extent.z = v.positive("experiment.lz");
    if (v.has("experiment.diffusivity")) {
        const double d = v.number("experiment.diffusivity");
        if (!(d >= 0.0)) {
            throw ConfigError("experiment.diffusivity", v.line("experiment.diffusivity"), "must be >= 0");
        }
        ex.fields.diffusivity = UniformDiffusivity{d};
    }
    if (v.has("experiment.vx")) ex.fields.velocity.x = v.number("experiment.vx");
    if (v.has("experiment.vy")) ex.fields.velocity.y = v.number("experiment.vy");
    if (v.has("experiment.vz")) ex.fields.velocity.z = v.number("experiment.vz");

    const bool source_keys = v.has("experiment.source_x") || v.has("experiment.source_y") ||
                             v.has("experiment.source_z") || v.has("experiment.source_value");
    std::string initial;
    if (v.has("experiment.initial")) {
        initial = v.text("experiment.initial");
    } else if (source_keys) {
        initial = "point";
    }
    if (!initial.empty()) {
        if (initial == "point") {
            // default location is the domain centre unless the experiment already has a source
            PointSource p{{ex.extent.x / 2, ex.extent.y / 2, ex.extent.z / 2}, 1.0};
            if (auto* old = std::get_if<PointSource>(&ex.fields.initial)) p = *old;
            if (v.has("experiment.source_x")) p.location.x = v.number("experiment.source_x");
            if (v.has("experiment.source_y")) p.location.y = v.number("experiment.source_y");
            if (v.has("experiment.source_z")) p.location.z = v.number("experiment.source_z");
            if (v.has("experiment.source_value")) p.value = v.number("experiment.source_value");
            ex.fields.initial = p;
        } else if (initial == "sine") {
            ex.fields.initial = SineLine{};
        } else if (initial == "uniform") {
            ex.fields.initial =
                UniformConcentration{v.has("experiment.source_value") ? v.number("experiment.source_value") : 1.0};
        } else {
            throw ConfigError("experiment.initial", v.line("experiment.initial"),
                              "expected point, sine or uniform, got '" + initial + "'");
        }
    }

    if (v.has("experiment.fracture")) ex.fracture = v.boolean("experiment.fracture");
    if (v.has("experiment.fracture_d")) ex.fracture_d = v.number("experiment.fracture_d");
    if (v.has("experiment.matrix_d")) ex.matrix_d = v.number("experiment.matrix_d");
    if (v.has("experiment.seed")) {
        const auto s = v.integer("experiment.seed");
        if (s < 0) throw ConfigError("experiment.seed", v.line("experiment.seed"), "must be >= 0");
        ex.seed = static_cast<std::uint64_t>(s);
    }
    if (ex.fracture && (ex.fracture_d < 0.0 || ex.matrix_d < 0.0)) {
        throw ConfigError("experiment.fracture_d", v.line("experiment.fracture_d"), "diffusivities must be >= 0");
    }
    if (ex.fracture && ex.dims.nz != 1) {
        throw ConfigError("experiment.nz", v.line("experiment.nz"), "fracture grids must have nz = 1");
    }
    if (v.has("experiment.reaction")) {
        const auto& r = v.text("experiment.reaction");
        if (r == "none") {
            ex.reaction.reset();
        } else if (r == "langmuir") {
            ex.reaction = langmuir_reaction();
        } else {
            throw ConfigError("experiment.reaction", v.line("experiment.reaction"),
                              "expected none or langmuir, got '" + r + "'");
        }
    }
    if (v.has("experiment.final_time")) ex.final_time = v.positive("experiment.final_time");
    if (v.has("experiment.reference_tol")) ex.reference_tol = v.positive("experiment.reference_tol");
    if (v.has("experiment.reference_method")) {
        const auto& m = v.text("experiment.reference_method");
        if (m == "auto") ex.reference_method = ExpmMethod::Auto;
        else if (m == "dense") ex.reference_method = ExpmMethod::Dense;
        else if (m == "krylov") ex.reference_method = ExpmMethod::Krylov;
        else throw ConfigError("experiment.reference_method", v.line("experiment.reference_method"),
                               "expected auto, dense or krylov, got '" + m + "'");
    }

    auto variant_of = [&](const std::string& field, const std::string& s) {
        try {
            return parse_variant(s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(field, v.line(field), e.what());
        }
    };
    if (v.has("scheme.variant")) rc.variant = variant_of("scheme.variant", v.text("scheme.variant"));
    if (v.has("scheme.delta_m")) rc.delta_m = v.positive("scheme.delta_m");
    if (v.has("scheme.schemes")) {
        ex.schemes.clear();
        for (const auto& s : v.list("scheme.schemes")) ex.schemes.push_back(variant_of("scheme.schemes", s));
    }
    if (v.has("scheme.ladder")) {
        ex.ladder.clear();
        for (const auto& s : v.list("scheme.ladder")) {
            double x = 0.0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
            if (ec != std::errc{} || p != s.data() + s.size() || !(x > 0.0)) {
                throw ConfigError("scheme.ladder", v.line("scheme.ladder"), "entries must be numbers > 0");
            }
            ex.ladder.push_back(x);
        }
        for (std::size_t i = 1; i < ex.ladder.size(); ++i) {
            if (!(ex.ladder[i] < ex.ladder[i - 1])) {
                throw ConfigError("scheme.ladder", v.line("scheme.ladder"), "must be strictly decreasing");
            }
        }
    }
    if (v.has("scheme.cascade_threshold")) rc.cascade_threshold = v.number("scheme.cascade_threshold");
    if (v.has("scheme.max_events")) {
        const auto n = v.integer("scheme.max_events");
        if (n < 1) throw ConfigError("scheme.max_events", v.line("scheme.max_events"), "must be >= 1");
        ex.max_events = static_cast<std::uint64_t>(n);
    }
    if (v.has("scheme.trace")) rc.trace = v.boolean("scheme.trace");
    if (v.has("output.dir")) rc.out_dir = v.text("output.dir");
    if (v.has("output.verbosity")) rc.verbosity = static_cast<int>(v.integer("output.verbosity"));

    return rc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("", 0, "cannot read config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace asyncfv
