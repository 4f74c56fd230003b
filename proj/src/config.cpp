#include "resched/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "resched/errors.hpp"

namespace resched {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double parse_double(const std::string& field, const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(field + ": not a number: '" + text + "'");
    }
}

long parse_long(const std::string& field, const std::string& text) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(field + ": not an integer: '" + text + "'");
    }
}

bool parse_bool(const std::string& field, const std::string& text) {
    if (text == "true" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "no" || text == "0") return false;
    throw ConfigError(field + ": not a boolean: '" + text + "'");
}

Eigen::MatrixXd parse_matrix(const std::string& field, const std::string& text, int rows,
                             int cols) {
    // rows < 0: infer a square matrix; cols < 0: infer column count from rows.
    const std::vector<std::string> toks = split_ws(text);
    std::vector<double> vals;
    vals.reserve(toks.size());
    for (const auto& t : toks) vals.push_back(parse_double(field, t));
    if (vals.empty()) throw ConfigError(field + ": empty matrix");
    int r = rows, c = cols;
    if (r < 0) {
        const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(vals.size()))));
        if (static_cast<std::size_t>(n) * n != vals.size())
            throw ConfigError(field + ": expected a square matrix, got " +
                              std::to_string(vals.size()) + " entries");
        r = c = n;
    } else if (c < 0) {
        if (vals.size() % r != 0)
            throw ConfigError(field + ": entry count " + std::to_string(vals.size()) +
                              " is not a multiple of " + std::to_string(r));
        c = static_cast<int>(vals.size()) / r;
    } else if (vals.size() != static_cast<std::size_t>(r) * c) {
        throw ConfigError(field + ": expected " + std::to_string(r * c) + " entries, got " +
                          std::to_string(vals.size()));
    }
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = vals[i * c + j];
    return m;
}

std::vector<long> parse_seeds(const std::string& field, const std::string& text) {
    std::vector<long> seeds;
    for (const auto& tok : split_ws(text)) {
        const std::size_t dots = tok.find("..");
        if (dots != std::string::npos) {
            const long lo = parse_long(field, tok.substr(0, dots));
            const long hi = parse_long(field, tok.substr(dots + 2));
            if (hi < lo) throw ConfigError(field + ": empty range '" + tok + "'");
            if (hi - lo >= 100000) throw ConfigError(field + ": range too large '" + tok + "'");
            for (long s = lo; s <= hi; ++s) seeds.push_back(s);
        } else {
            seeds.push_back(parse_long(field, tok));
        }
    }
    if (seeds.empty()) throw ConfigError(field + ": no seeds given");
    return seeds;
}

ChannelSchedule parse_segments(const std::string& field, const std::string& text) {
    ChannelSchedule sched;
    for (const auto& tok : split_ws(text)) {
        const std::size_t colon = tok.find(':');
        if (colon == std::string::npos)
            throw ConfigError(field + ": expected start:rate, got '" + tok + "'");
        ChannelSegment seg;
        seg.start = parse_long(field, tok.substr(0, colon));
        seg.r_s = parse_double(field, tok.substr(colon + 1));
        sched.segments.push_back(seg);
    }
    try {
        sched.validate();
    } catch (const std::exception& e) {
        throw ConfigError(field + ": " + e.what());
    }
    return sched;
}

StepSchedule parse_schedule(const std::string& field, const std::string& text) {
    const std::vector<std::string> toks = split_ws(text);
    if (toks.empty()) throw ConfigError(field + ": empty schedule");
    StepSchedule s;
    if (toks[0] == "power")
        s.kind = StepSchedule::Kind::power;
    else if (toks[0] == "log_over_n")
        s.kind = StepSchedule::Kind::log_over_n;
    else if (toks[0] == "one_over_n_log_n")
        s.kind = StepSchedule::Kind::one_over_n_log_n;
    else
        throw ConfigError(field + ": unknown schedule kind '" + toks[0] + "'");
    if (toks.size() >= 2) s.c = parse_double(field, toks[1]);
    if (toks.size() >= 3) {
        if (s.kind != StepSchedule::Kind::power)
            throw ConfigError(field + ": exponent only applies to the power kind");
        s.a = parse_double(field, toks[2]);
    }
    if (toks.size() > 3) throw ConfigError(field + ": too many tokens");
    return s;
}

const char* schedule_kind_name(StepSchedule::Kind k) {
    switch (k) {
        case StepSchedule::Kind::power: return "power";
        case StepSchedule::Kind::log_over_n: return "log_over_n";
        case StepSchedule::Kind::one_over_n_log_n: return "one_over_n_log_n";
    }
    return "?";
}

struct AlgoFlags {
    bool saw_epsilon = false;
    bool saw_tts_inner = false;
    bool saw_x = false;
    bool saw_warm = false;
    bool saw_idle = false;
    bool saw_struct_flag = false;
};

void finish_algorithm(const std::string& section, const AlgorithmSpec& spec,
                      const AlgoFlags& flags) {
    const Algorithm algo = spec.options.algo;
    const bool sync_family = algo == Algorithm::sync || algo == Algorithm::sync_structured ||
                             (algo == Algorithm::two_time_scale &&
                              (spec.options.tts_inner == Algorithm::sync ||
                               spec.options.tts_inner == Algorithm::sync_structured));
    const bool structured_family =
        algo == Algorithm::structured || algo == Algorithm::sync_structured ||
        (algo == Algorithm::two_time_scale &&
         (spec.options.tts_inner == Algorithm::structured ||
          spec.options.tts_inner == Algorithm::sync_structured));
    if (flags.saw_tts_inner && algo != Algorithm::two_time_scale)
        throw ConfigError(section + ".tts_inner: only valid for two_time_scale");
    if ((flags.saw_x || flags.saw_warm) && algo != Algorithm::mdp_x)
        throw ConfigError(section + ": x_iters/warm_start only valid for mdp_<x>");
    if (flags.saw_idle && !sync_family)
        throw ConfigError(section + ".idle_every_step: only valid for synchronous learners");
    if (flags.saw_struct_flag && !structured_family)
        throw ConfigError(section +
                          ": vector_correction/project_dual only valid for structured learners");
    if (flags.saw_epsilon &&
        (algo == Algorithm::param_p2 || algo == Algorithm::mdp_x))
        throw ConfigError(section + ".epsilon: this learner does not explore");
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.system.A.resize(2, 2);
    cfg.system.A << 1.2, 1.0, 0.0, 0.8;
    cfg.system.C = Eigen::MatrixXd::Identity(2, 2);
    cfg.system.Sigma_w = Eigen::MatrixXd::Identity(2, 2);
    cfg.system.Sigma_v = Eigen::MatrixXd::Identity(2, 2);
    cfg.channel = ChannelSchedule::constant(0.7);
    cfg.seeds.resize(10);
    for (int i = 0; i < 10; ++i) cfg.seeds[i] = i + 1;
    return cfg;
}

void ExperimentConfig::validate() const {
    try {
        system.validate();
        channel.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (M < 1 || M > 100000) throw ConfigError("[problem].M: must be in [1, 100000]");
    if (solver_tol <= 0) throw ConfigError("[problem].solver_tol: must be positive");
    if (kind == ProblemKind::costly && lambda < 0)
        throw ConfigError("[problem].lambda: must be nonnegative");
    if (kind == ProblemKind::constrained && (b <= 0 || b > 1))
        throw ConfigError("[problem].b: budget must lie in (0,1]");
    if (T < 1) throw ConfigError("[run].T: must be positive");
    if (window < 1 || window > T) throw ConfigError("[run].window: must lie in [1, T]");
    if (seeds.empty()) throw ConfigError("[run].seeds: at least one seed required");
    for (const auto& spec : algorithms) {
        if (spec.options.M != M)
            throw ConfigError("algorithm " + spec.label + ": truncation level mismatch");
        if (spec.options.algo == Algorithm::mdp_x && spec.options.x_iters < 1)
            throw ConfigError("algorithm " + spec.label + ": x_iters must be >= 1");
        if (spec.options.epsilon &&
            (*spec.options.epsilon < 0 || *spec.options.epsilon > 1))
            throw ConfigError("algorithm " + spec.label + ": epsilon must be in [0,1]");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg = default_config();
    cfg.seeds.clear();  // re-filled below unless the file names its own

    std::istringstream in(text);
    std::string line;
    std::string section;
    bool saw_seeds = false;
    bool saw_lambda = false, saw_b = false;
    AlgorithmSpec* current_algo = nullptr;
    AlgoFlags flags;

    auto close_algo = [&]() {
        if (current_algo) finish_algorithm("algorithm " + current_algo->label, *current_algo, flags);
        current_algo = nullptr;
        flags = AlgoFlags{};
    };

    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            close_algo();
            section = trim(line.substr(1, line.size() - 2));
            if (section.rfind("algorithm", 0) == 0) {
                const std::string tok = trim(section.substr(9));
                if (tok.empty())
                    throw ConfigError("line " + std::to_string(lineno) +
                                      ": algorithm section needs a token");
                AlgorithmSpec spec;
                spec.label = tok;
                long x = 1;
                try {
                    spec.options.algo = algorithm_from_token(tok, &x);
                } catch (const std::exception& e) {
                    throw ConfigError("[" + section + "]: " + e.what());
                }
                spec.options.x_iters = x;
                cfg.algorithms.push_back(spec);
                current_algo = &cfg.algorithms.back();
            } else if (section != "system" && section != "channel" && section != "problem" &&
                       section != "run") {
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" +
                                  section + "]");
            }
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string field = "[" + section + "]." + key;
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");

        if (section == "system") {
            if (key == "A")
                cfg.system.A = parse_matrix(field, val, -1, -1);
            else if (key == "C")
                cfg.system.C = parse_matrix(field, val, -1, -1);
            else if (key == "Sigma_w")
                cfg.system.Sigma_w = parse_matrix(field, val, -1, -1);
            else if (key == "Sigma_v")
                cfg.system.Sigma_v = parse_matrix(field, val, -1, -1);
            else
                throw ConfigError(field + ": unknown key");
        } else if (section == "channel") {
            if (key == "segments")
                cfg.channel = parse_segments(field, val);
            else if (key == "rate")
                cfg.channel = ChannelSchedule::constant(parse_double(field, val));
            else
                throw ConfigError(field + ": unknown key");
        } else if (section == "problem") {
            if (key == "kind") {
                if (val == "costly")
                    cfg.kind = ProblemKind::costly;
                else if (val == "constrained")
                    cfg.kind = ProblemKind::constrained;
                else
                    throw ConfigError(field + ": expected costly or constrained");
            } else if (key == "lambda") {
                cfg.lambda = parse_double(field, val);
                saw_lambda = true;
            } else if (key == "b") {
                cfg.b = parse_double(field, val);
                saw_b = true;
            } else if (key == "M") {
                cfg.M = static_cast<int>(parse_long(field, val));
            } else if (key == "solver_tol") {
                cfg.solver_tol = parse_double(field, val);
            } else {
                throw ConfigError(field + ": unknown key");
            }
        } else if (section == "run") {
            if (key == "T")
                cfg.T = parse_long(field, val);
            else if (key == "seeds") {
                cfg.seeds = parse_seeds(field, val);
                saw_seeds = true;
            } else if (key == "window")
                cfg.window = static_cast<int>(parse_long(field, val));
            else if (key == "out_dir")
                cfg.out_dir = val;
            else
                throw ConfigError(field + ": unknown key");
        } else {  // algorithm section
            LearnerOptions& o = current_algo->options;
            if (key == "epsilon") {
                o.epsilon = parse_double(field, val);
                flags.saw_epsilon = true;
            } else if (key == "alpha") {
                o.alpha = parse_schedule(field, val);
            } else if (key == "beta") {
                o.beta = parse_schedule(field, val);
            } else if (key == "vector_correction") {
                o.structured.vector_correction = parse_bool(field, val);
                flags.saw_struct_flag = true;
            } else if (key == "project_dual") {
                o.structured.project_dual = parse_bool(field, val);
                flags.saw_struct_flag = true;
            } else if (key == "idle_every_step") {
                o.sync.idle_every_step = parse_bool(field, val);
                flags.saw_idle = true;
            } else if (key == "tts_inner") {
                try {
                    o.tts_inner = algorithm_from_token(val, nullptr);
                } catch (const std::exception& e) {
                    throw ConfigError(field + ": " + e.what());
                }
                flags.saw_tts_inner = true;
            } else if (key == "x_iters") {
                o.x_iters = parse_long(field, val);
                flags.saw_x = true;
            } else if (key == "warm_start") {
                o.warm_start = parse_bool(field, val);
                flags.saw_warm = true;
            } else {
                throw ConfigError(field + ": unknown key");
            }
        }
    }
    close_algo();

    if (!saw_seeds) {
        cfg.seeds.resize(10);
        for (int i = 0; i < 10; ++i) cfg.seeds[i] = i + 1;
    }
    if (cfg.kind == ProblemKind::costly && saw_b)
        throw ConfigError("[problem].b: only valid for the constrained kind");
    if (cfg.kind == ProblemKind::constrained && saw_lambda)
        throw ConfigError("[problem].lambda: only valid for the costly kind");

    // Resolve problem-level prices and budgets into each learner.
    for (auto& spec : cfg.algorithms) {
        spec.options.M = cfg.M;
        switch (spec.options.algo) {
            case Algorithm::two_time_scale:
            case Algorithm::param_p2:
                if (cfg.kind != ProblemKind::constrained)
                    throw ConfigError("algorithm " + spec.label +
                                      ": requires the constrained kind");
                spec.options.b = cfg.b;
                spec.options.lambda = 0.0;  // multiplier starts at zero
                break;
            default:
                if (cfg.kind != ProblemKind::costly)
                    throw ConfigError("algorithm " + spec.label + ": requires the costly kind");
                spec.options.lambda = cfg.lambda;
                break;
        }
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::vector<std::string> preset_names() {
    return {"costly20", "constrained04", "timevarying", "mdpx"};
}

ExperimentConfig preset_config(const std::string& name) {
    // Presets are expressed in the same text format users write, so the
    // parser is the single source of truth for resolution rules.
    std::string body;
    if (name == "costly20") {
        body =
            "[problem]\nkind = costly\nlambda = 20\n"
            "[algorithm sync]\nalpha = power 1.0 0.8\n"
            "[algorithm async]\n"
            "[algorithm structured]\nvector_correction = true\nproject_dual = true\n";
    } else if (name == "constrained04") {
        body =
            "[problem]\nkind = constrained\nb = 0.4\n"
            "[algorithm two_time_scale]\ntts_inner = sync\nalpha = power 1.0 0.8\n"
            "beta = power 8.0 0.9\n"
            "[algorithm param_p2]\n";
    } else if (name == "timevarying") {
        body =
            "[channel]\nsegments = 0:0.9 2500:0.6\n"
            "[problem]\nkind = costly\nlambda = 10\n"
            "[algorithm sync_structured]\nvector_correction = true\nproject_dual = true\n"
            "[algorithm sync]\nalpha = power 1.0 0.8\n";
    } else if (name == "mdpx") {
        body =
            "[problem]\nkind = costly\nlambda = 20\n"
            "[algorithm sync]\nalpha = power 1.0 0.8\n"
            "[algorithm mdp_1]\n"
            "[algorithm mdp_50]\n";
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return parse_config_text(body);
}

std::string canonical_text(const ExperimentConfig& cfg) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    auto mat = [&](const char* name, const Eigen::MatrixXd& m) {
        out << name << ' ' << m.rows() << 'x' << m.cols() << ':';
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) {
                out << ' ';
                num(m(i, j));
            }
        out << '\n';
    };
    mat("A", cfg.system.A);
    mat("C", cfg.system.C);
    mat("Sigma_w", cfg.system.Sigma_w);
    mat("Sigma_v", cfg.system.Sigma_v);
    out << "channel:";
    for (const auto& seg : cfg.channel.segments) {
        out << ' ' << seg.start << ':';
        num(seg.r_s);
    }
    out << '\n';
    out << "kind " << (cfg.kind == ProblemKind::costly ? "costly" : "constrained") << '\n';
    out << "lambda ";
    num(cfg.lambda);
    out << "\nb ";
    num(cfg.b);
    out << "\nM " << cfg.M << "\nsolver_tol ";
    num(cfg.solver_tol);
    out << "\nT " << cfg.T << "\nwindow " << cfg.window << "\nseeds";
    for (long s : cfg.seeds) out << ' ' << s;
    out << '\n';
    auto sched = [&](const StepSchedule& s) {
        out << schedule_kind_name(s.kind) << ' ';
        num(s.c);
        out << ' ';
        num(s.a);
    };
    for (const auto& spec : cfg.algorithms) {
        const LearnerOptions& o = spec.options;
        out << "algo " << spec.label << " eps ";
        num(o.resolved_epsilon());
        out << " alpha ";
        sched(o.alpha);
        out << " beta ";
        sched(o.beta);
        out << " vc " << o.structured.vector_correction << " pd " << o.structured.project_dual
            << " idle " << o.sync.idle_every_step << " inner " << algorithm_token(o.tts_inner)
            << " x " << o.x_iters << " warm " << o.warm_start << '\n';
    }
    return out.str();
}

std::string config_digest(const ExperimentConfig& cfg) {
    const std::string text = canonical_text(cfg);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace resched
