#include "mlnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mlnn {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct Entry {
    std::string value;
    int line = 0;
};

struct Section {
    std::string name;
    int line = 0;
    std::map<std::string, Entry> entries;
};

class Parser {
public:
    explicit Parser(std::string_view origin) : origin_(origin) {}

    [[noreturn]] void fail(int line, const std::string& message) const
    {
        if (line > 0) {
            throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + message);
        }
        throw ConfigError(origin_ + ": " + message);
    }

    std::vector<Section> sections(std::string_view text) const
    {
        std::vector<Section> out;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto end = std::min(text.find('\n', pos), text.size());
            std::string_view line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) {
                line = line.substr(0, hash);
            }
            line = trim(line);
            if (line.empty()) {
                continue;
            }
            if (line.front() == '[') {
                if (line.back() != ']') {
                    fail(line_no, "unterminated section header");
                }
                out.push_back({std::string(trim(line.substr(1, line.size() - 2))), line_no, {}});
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                fail(line_no, "expected 'key = value'");
            }
            if (out.empty()) {
                fail(line_no, "entry outside of any section");
            }
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) {
                fail(line_no, "empty key");
            }
            if (value.empty()) {
                fail(line_no, "empty value for '" + key + "'");
            }
            if (!out.back().entries.emplace(key, Entry{value, line_no}).second) {
                fail(line_no, "duplicate key '" + key + "'");
            }
        }
        return out;
    }

    double real(const Entry& e, const std::string& key) const
    {
        double v = 0.0;
        const char* first = e.value.data();
        const char* last = first + e.value.size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) {
            fail(e.line, "'" + key + "' expects a number, got '" + e.value + "'");
        }
        return v;
    }

    long long integer(const Entry& e, const std::string& key) const
    {
        long long v = 0;
        const char* first = e.value.data();
        const char* last = first + e.value.size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) {
            fail(e.line, "'" + key + "' expects an integer, got '" + e.value + "'");
        }
        return v;
    }

    int count(const Entry& e, const std::string& key, int min) const
    {
        const long long v = integer(e, key);
        if (v < min || v > 1'000'000'000) {
            fail(e.line, "'" + key + "' must be at least " + std::to_string(min));
        }
        return static_cast<int>(v);
    }

    std::string origin_;
};

int parse_level_index(const Parser& parser, const Section& s)
{
    const std::string_view rest = trim(std::string_view(s.name).substr(5));
    int idx = -1;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), idx);
    if (rest.empty() || ec != std::errc() || ptr != rest.data() + rest.size() || idx < 0) {
        parser.fail(s.line, "level sections are written [level N] with N = 0, 1, ...");
    }
    return idx;
}

void read_experiment(const Parser& p, const Section& s, ExperimentConfig& cfg)
{
    static const std::set<std::string> problem_keys = {"k", "epsilon", "kappa_sq"};
    int problem_line = 0;
    for (const auto& [key, e] : s.entries) {
        if (key == "problem") {
            cfg.problem = e.value;
            problem_line = e.line;
        } else if (problem_keys.count(key)) {
            cfg.problem_parameters[key] = p.real(e, key);
        } else if (key == "seed") {
            const long long v = p.integer(e, key);
            if (v < 0) {
                p.fail(e.line, "'seed' must be non-negative");
            }
            cfg.seed = static_cast<std::uint64_t>(v);
        } else if (key == "output_dir") {
            cfg.output_dir = e.value;
        } else if (key == "collocation_1d") {
            cfg.options.collocation_1d = p.count(e, key, 1);
        } else if (key == "collocation_2d") {
            cfg.options.collocation_2d = p.count(e, key, 1);
        } else if (key == "eval_1d") {
            cfg.options.eval_1d = p.count(e, key, 1);
        } else if (key == "eval_2d") {
            cfg.options.eval_2d = p.count(e, key, 1);
        } else if (key == "elm_eval_1d") {
            cfg.options.elm_eval_1d = p.count(e, key, 1);
        } else if (key == "elm_eval_2d") {
            cfg.options.elm_eval_2d = p.count(e, key, 1);
        } else if (key == "elm_width") {
            cfg.options.elm_width = p.count(e, key, 1);
        } else if (key == "elm_seed") {
            cfg.options.elm_seed = static_cast<std::uint64_t>(p.count(e, key, 0));
        } else if (key == "metric_stride_adam") {
            cfg.options.metric_stride_adam = p.count(e, key, 0);
        } else if (key == "metric_stride_lbfgs") {
            cfg.options.metric_stride_lbfgs = p.count(e, key, 0);
        } else {
            p.fail(e.line, "unknown key '" + key + "' in [experiment]");
        }
    }
    if (cfg.problem.empty()) {
        p.fail(s.line, "[experiment] is missing required field 'problem'");
    }
    const auto& registry = problem_registry();
    const auto it = registry.find(cfg.problem);
    if (it == registry.end()) {
        p.fail(problem_line, "unknown problem '" + cfg.problem + "'");
    }
    for (const auto& [key, value] : cfg.problem_parameters) {
        if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
            p.fail(s.entries.at(key).line, "problem '" + cfg.problem + "' does not take '" + key + "'");
        }
    }
    for (const std::string& key : it->second) {
        if (!cfg.problem_parameters.count(key)) {
            p.fail(s.line, "problem '" + cfg.problem + "' needs field '" + key + "'");
        }
    }
    try {
        (void)make_problem(cfg.problem, cfg.problem_parameters);
    } catch (const Error& err) {
        p.fail(problem_line, err.what());
    }
}

LevelConfig read_level(const Parser& p, const Section& s, int index, std::uint64_t base_seed)
{
    LevelConfig level;
    level.network.kind = ArchitectureKind::FourierSine;
    level.seed = base_seed + static_cast<std::uint64_t>(index);
    if (index == 0) {
        level.pinned_mu = 1.0;
    }
    int layers = 1;
    int width = 0;
    for (const auto& [key, e] : s.entries) {
        if (key == "hidden_layers") {
            layers = p.count(e, key, 1);
        } else if (key == "width") {
            width = p.count(e, key, 1);
        } else if (key == "architecture") {
            try {
                level.network.kind = parse_architecture(e.value);
            } catch (const Error& err) {
                p.fail(e.line, err.what());
            }
        } else if (key == "wavenumbers") {
            level.network.num_wavenumbers = p.count(e, key, 0);
        } else if (key == "adam_iterations") {
            level.adam.num_iterations = p.count(e, key, 0);
        } else if (key == "adam_lr") {
            level.adam.learning_rate = p.real(e, key);
        } else if (key == "adam_beta1") {
            level.adam.beta1 = p.real(e, key);
        } else if (key == "adam_beta2") {
            level.adam.beta2 = p.real(e, key);
        } else if (key == "adam_epsilon") {
            level.adam.epsilon = p.real(e, key);
        } else if (key == "lbfgs_iterations") {
            level.lbfgs.num_iterations = p.count(e, key, 0);
        } else if (key == "lbfgs_history") {
            level.lbfgs.history_size = p.count(e, key, 1);
        } else if (key == "lbfgs_step") {
            level.lbfgs.initial_step = p.real(e, key);
        } else if (key == "seed") {
            const long long v = p.integer(e, key);
            if (v < 0) {
                p.fail(e.line, "'seed' must be non-negative");
            }
            level.seed = static_cast<std::uint64_t>(v);
        } else if (key == "mu") {
            if (e.value == "elm") {
                level.pinned_mu.reset();
            } else {
                const double mu = p.real(e, key);
                if (!(mu > 0.0) || !std::isfinite(mu)) {
                    p.fail(e.line, "'mu' must be positive or 'elm'");
                }
                level.pinned_mu = mu;
            }
        } else if (key == "collocation") {
            level.collocation = p.count(e, key, 1);
        } else {
            p.fail(e.line, "unknown key '" + key + "' in [" + s.name + "]");
        }
    }
    if (width == 0) {
        p.fail(s.line, "[" + s.name + "] is missing required field 'width'");
    }
    level.network.hidden_widths.assign(static_cast<std::size_t>(layers), width);
    try {
        level.network.validate();
        level.adam.validate();
        level.lbfgs.validate();
    } catch (const Error& err) {
        p.fail(s.line, "[" + s.name + "]: " + err.what());
    }
    return level;
}

std::string number(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

ExperimentConfig parse_config(std::string_view text, std::string_view origin)
{
    const Parser parser(origin);
    const std::vector<Section> sections = parser.sections(text);
    ExperimentConfig cfg;
    const Section* experiment = nullptr;
    std::map<int, const Section*> levels;
    for (const Section& s : sections) {
        if (s.name == "experiment") {
            if (experiment) {
                parser.fail(s.line, "duplicate [experiment] section");
            }
            experiment = &s;
        } else if (s.name.rfind("level", 0) == 0) {
            const int idx = parse_level_index(parser, s);
            if (!levels.emplace(idx, &s).second) {
                parser.fail(s.line, "duplicate [level " + std::to_string(idx) + "] section");
            }
        } else {
            parser.fail(s.line, "unknown section [" + s.name + "]");
        }
    }
    if (!experiment) {
        parser.fail(0, "missing [experiment] section (required field 'problem')");
    }
    read_experiment(parser, *experiment, cfg);
    if (levels.empty()) {
        parser.fail(0, "at least one [level N] section is required");
    }
    int expected = 0;
    for (const auto& [idx, section] : levels) {
        if (idx != expected) {
            parser.fail(section->line, "levels must be numbered 0, 1, ... without gaps; expected level " +
                                           std::to_string(expected));
        }
        cfg.levels.push_back(read_level(parser, *section, idx, cfg.seed));
        ++expected;
    }
    const ProblemDef problem = make_problem(cfg.problem, cfg.problem_parameters);
    for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
        try {
            check_levels(problem, {cfg.levels[i]}, cfg.options);
        } catch (const Error& err) {
            // check_levels numbers the single level 0; report the real index.
            const std::string what = err.what();
            parser.fail(levels.at(static_cast<int>(i))->line,
                        "[level " + std::to_string(i) + "]: " + what.substr(what.find(": ") + 2));
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path.string() + ": cannot open file");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

std::string render_config(const ExperimentConfig& config)
{
    std::ostringstream out;
    const MultilevelOptions& o = config.options;
    out << "[experiment]\n";
    out << "problem = " << config.problem << "\n";
    for (const auto& [key, value] : config.problem_parameters) {
        out << key << " = " << number(value) << "\n";
    }
    out << "seed = " << config.seed << "\n";
    if (!config.output_dir.empty()) {
        out << "output_dir = " << config.output_dir << "\n";
    }
    out << "collocation_1d = " << o.collocation_1d << "\n";
    out << "collocation_2d = " << o.collocation_2d << "\n";
    out << "eval_1d = " << o.eval_1d << "\n";
    out << "eval_2d = " << o.eval_2d << "\n";
    out << "elm_eval_1d = " << o.elm_eval_1d << "\n";
    out << "elm_eval_2d = " << o.elm_eval_2d << "\n";
    out << "elm_width = " << o.elm_width << "\n";
    out << "elm_seed = " << o.elm_seed << "\n";
    out << "metric_stride_adam = " << o.metric_stride_adam << "\n";
    out << "metric_stride_lbfgs = " << o.metric_stride_lbfgs << "\n";
    for (std::size_t i = 0; i < config.levels.size(); ++i) {
        const LevelConfig& l = config.levels[i];
        out << "\n[level " << i << "]\n";
        out << "hidden_layers = " << l.network.hidden_widths.size() << "\n";
        out << "width = " << l.network.hidden_widths.front() << "\n";
        out << "architecture = " << to_string(l.network.kind) << "\n";
        out << "wavenumbers = " << l.network.num_wavenumbers << "\n";
        out << "adam_iterations = " << l.adam.num_iterations << "\n";
        out << "adam_lr = " << number(l.adam.learning_rate) << "\n";
        out << "adam_beta1 = " << number(l.adam.beta1) << "\n";
        out << "adam_beta2 = " << number(l.adam.beta2) << "\n";
        out << "adam_epsilon = " << number(l.adam.epsilon) << "\n";
        out << "lbfgs_iterations = " << l.lbfgs.num_iterations << "\n";
        out << "lbfgs_history = " << l.lbfgs.history_size << "\n";
        out << "lbfgs_step = " << number(l.lbfgs.initial_step) << "\n";
        out << "seed = " << l.seed << "\n";
        out << "mu = " << (l.pinned_mu ? number(*l.pinned_mu) : std::string("elm")) << "\n";
        if (l.collocation > 0) {
            out << "collocation = " << l.collocation << "\n";
        }
    }
    return out.str();
}

} // namespace mlnn
