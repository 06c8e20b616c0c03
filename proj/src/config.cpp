#include "mfdelay/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mfdelay/builtin_models.hpp"
#include "mfdelay/expressions.hpp"
#include "mfdelay/recursive_utility.hpp"

namespace mfdelay {

namespace {

const std::set<std::string> kModels{"recursive_utility", "linear_toy", "jump_martingale",
                                    "brownian_bsde", "expression"};
const std::set<std::string> kChecks{"lambda",         "p",      "residual", "gradient",
                                    "scaling",        "bsde",   "fubini",   "hamiltonian",
                                    "transversality", "jumps",  "norms"};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        const std::string item = trim(cur);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Collects raw key/value pairs and tracks which keys were consumed so that
// unknown keys can be reported with their names.
struct KeyValueBag {
    std::map<std::string, std::string> values;
    std::set<std::string> consumed;
    std::vector<std::string>& errors;

    explicit KeyValueBag(std::vector<std::string>& errs) : errors(errs) {}

    bool has(const std::string& key) const { return values.count(key) > 0; }

    std::optional<std::string> raw(const std::string& key) {
        auto it = values.find(key);
        if (it == values.end()) return std::nullopt;
        consumed.insert(key);
        return it->second;
    }

    void number(const std::string& key, double& out) {
        const auto v = raw(key);
        if (!v) return;
        try {
            std::size_t used = 0;
            out = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            errors.push_back("key '" + key + "': expected a number, got '" + *v + "'");
        }
    }

    void count(const std::string& key, std::size_t& out) {
        const auto v = raw(key);
        if (!v) return;
        try {
            const long long parsed = std::stoll(*v);
            if (parsed < 0) throw std::invalid_argument("negative");
            out = static_cast<std::size_t>(parsed);
        } catch (const std::exception&) {
            errors.push_back("key '" + key + "': expected a nonnegative integer, got '" + *v +
                             "'");
        }
    }

    void integer(const std::string& key, int& out) {
        const auto v = raw(key);
        if (!v) return;
        try {
            out = std::stoi(*v);
        } catch (const std::exception&) {
            errors.push_back("key '" + key + "': expected an integer, got '" + *v + "'");
        }
    }

    void seed64(const std::string& key, std::uint64_t& out) {
        const auto v = raw(key);
        if (!v) return;
        try {
            out = std::stoull(*v);
        } catch (const std::exception&) {
            errors.push_back("key '" + key + "': expected an unsigned integer, got '" + *v +
                             "'");
        }
    }

    void boolean(const std::string& key, bool& out) {
        const auto v = raw(key);
        if (!v) return;
        if (*v == "true" || *v == "1") {
            out = true;
        } else if (*v == "false" || *v == "0") {
            out = false;
        } else {
            errors.push_back("key '" + key + "': expected true/false, got '" + *v + "'");
        }
    }

    void text(const std::string& key, std::string& out) {
        const auto v = raw(key);
        if (v) out = *v;
    }

    void number_list(const std::string& key, std::vector<double>& out) {
        const auto v = raw(key);
        if (!v) return;
        out.clear();
        for (const std::string& item : split(*v, ',')) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                errors.push_back("key '" + key + "': expected numbers, got '" + item + "'");
                return;
            }
        }
    }

    void text_list(const std::string& key, std::vector<std::string>& out) {
        const auto v = raw(key);
        if (v) out = split(*v, ',');
    }
};

DelayMeasure parse_measure(const std::string& text, double delta, double dt) {
    if (text == "dirac0") return DelayMeasure::dirac_at_zero();
    if (text == "dirac_minus_delta") return DelayMeasure::dirac_at_minus_delta(delta);
    if (text.rfind("exp:", 0) == 0)
        return DelayMeasure::exponential(std::stod(text.substr(4)), delta, dt);
    if (text.rfind("atoms:", 0) == 0) {
        std::vector<double> offsets, masses;
        for (const std::string& atom : split(text.substr(6), ';')) {
            const auto sep = atom.find(':');
            if (sep == std::string::npos)
                throw PreconditionError("delay atom '" + atom + "' is not offset:mass");
            offsets.push_back(std::stod(atom.substr(0, sep)));
            masses.push_back(std::stod(atom.substr(sep + 1)));
        }
        return DelayMeasure::discrete_atoms(std::move(offsets), std::move(masses), delta);
    }
    throw PreconditionError("unknown delay measure '" + text +
                            "' (expected dirac0 | dirac_minus_delta | exp:RATE | "
                            "atoms:s1:m1;s2:m2)");
}

} // namespace

ParseResult parse_config_text(const std::string& text) {
    ParseResult result;
    KeyValueBag bag(result.errors);

    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            result.errors.push_back("line " + std::to_string(line_no) +
                                    ": expected key = value, got '" + line + "'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            result.errors.push_back("line " + std::to_string(line_no) + ": empty key");
            continue;
        }
        if (bag.values.count(key)) {
            result.errors.push_back("key '" + key + "': duplicated");
            continue;
        }
        bag.values[key] = value;
    }

    ExperimentConfig cfg;
    bag.text("model", cfg.model);
    if (!kModels.count(cfg.model)) {
        result.errors.push_back("key 'model': unknown model '" + cfg.model + "'");
        return result;
    }

    // model-dependent defaults, overridable below
    if (cfg.model == "recursive_utility") {
        cfg.infinite_horizon = true;
        cfg.u_lo = 1e-2;
        cfg.u_hi = 10.0;
        cfg.control_value = cfg.pi0;
        cfg.checks = {"lambda", "p", "residual", "transversality", "gradient", "fubini",
                      "hamiltonian"};
    } else {
        cfg.infinite_horizon = false;
        cfg.T = 1.0;
        if (cfg.model == "linear_toy") {
            cfg.u_lo = -1.0;
            cfg.u_hi = 1.0;
            cfg.checks = {"gradient", "scaling", "bsde", "hamiltonian", "fubini"};
        } else if (cfg.model == "jump_martingale") {
            cfg.jump_marks = {0.3};
            cfg.jump_weights = {2.0};
            cfg.checks = {"jumps", "fubini"};
        } else if (cfg.model == "brownian_bsde") {
            cfg.x0 = 0.0;
            cfg.a = 1.0;
            cfg.checks = {"bsde", "hamiltonian", "fubini"};
        } else {
            cfg.checks = {"hamiltonian", "gradient", "bsde"};
        }
    }

    if (auto horizon = bag.raw("horizon")) {
        if (*horizon == "finite") {
            cfg.infinite_horizon = false;
        } else if (*horizon == "infinite") {
            cfg.infinite_horizon = true;
        } else {
            result.errors.push_back("key 'horizon': expected finite or infinite, got '" +
                                    *horizon + "'");
        }
    }

    bag.number("T", cfg.T);
    bag.number("dt", cfg.dt);
    bag.number("delta", cfg.delta);
    bag.number("kappa", cfg.kappa);
    bag.count("n_particles", cfg.n_particles);
    bag.seed64("seed", cfg.seed);
    bag.integer("basis_degree", cfg.basis_degree);
    bag.boolean("basis_lifts", cfg.basis_lifts);
    bag.number("ridge", cfg.ridge);
    bag.text("out_dir", cfg.out_dir);
    bag.count("threads", cfg.threads);
    bag.number("u_lo", cfg.u_lo);
    bag.number("u_hi", cfg.u_hi);
    bag.number("control", cfg.control_value);
    bag.text_list("delay_measures", cfg.delay_measures);
    bag.number_list("jump_marks", cfg.jump_marks);
    bag.number_list("jump_weights", cfg.jump_weights);
    bag.number_list("T_list", cfg.T_list);

    bag.number("x0", cfg.x0);
    bag.number("c", cfg.c);
    bag.number("alpha", cfg.alpha);
    bag.number("beta", cfg.beta);
    const bool control_set = bag.has("control");
    bag.number("pi0", cfg.pi0);
    if (cfg.model == "recursive_utility" && !control_set) cfg.control_value = cfg.pi0;
    bag.number("sigma0", cfg.sigma0);
    bag.number("c1", cfg.c1);
    bag.number("c2", cfg.c2);
    bag.number("cu", cfg.cu);
    bag.number("gy", cfg.gy);
    bag.number("h1y", cfg.h1y);
    bag.number("h2x", cfg.h2x);
    bag.number("a", cfg.a);

    bag.text("b", cfg.expr_b);
    bag.text("sigma", cfg.expr_sigma);
    bag.text("gamma", cfg.expr_gamma);
    bag.text("g", cfg.expr_g);
    bag.text("f", cfg.expr_f);
    bag.text("h1", cfg.expr_h1);
    bag.text("h", cfg.expr_h);
    bag.text("x0_expr", cfg.expr_x0);

    bag.number("tol_residual", cfg.tol_residual);
    bag.number("tol_gradient", cfg.tol_gradient);
    bag.number("tol_transversality_rel", cfg.tol_transversality_rel);
    bag.number("tol_scaling_lo", cfg.tol_scaling_lo);
    bag.number("tol_scaling_hi", cfg.tol_scaling_hi);
    bag.number("tol_fubini", cfg.tol_fubini);
    bag.number("tol_hamiltonian", cfg.tol_hamiltonian);
    bag.number("s_fd", cfg.s_fd);
    bag.count("gradient_bumps", cfg.gradient_bumps);
    bag.count("n_probe", cfg.n_probe);

    if (auto info = bag.raw("info_mode")) {
        if (*info == "full") {
            cfg.flow = InformationFlow::full();
        } else if (info->rfind("delayed:", 0) == 0) {
            try {
                cfg.flow = InformationFlow::delayed(std::stod(info->substr(8)));
            } catch (const std::exception&) {
                result.errors.push_back("key 'info_mode': malformed lag in '" + *info + "'");
            }
        } else {
            result.errors.push_back("key 'info_mode': expected full or delayed:LAG, got '" +
                                    *info + "'");
        }
    }
    if (auto checks = bag.raw("checks")) {
        cfg.checks = split(*checks, ',');
    }

    // unknown keys: everything present but never consumed
    for (const auto& [key, value] : bag.values) {
        (void)value;
        if (!bag.consumed.count(key)) result.errors.push_back("unknown key '" + key + "'");
    }

    // ------------------------------------------------------------------
    // cross-field validation
    // ------------------------------------------------------------------
    if (!(cfg.T > 0.0)) result.errors.push_back("key 'T': must be positive");
    if (!(cfg.dt > 0.0)) result.errors.push_back("key 'dt': must be positive");
    if (cfg.delta < 0.0) result.errors.push_back("key 'delta': must be nonnegative");
    if (cfg.n_particles == 0) result.errors.push_back("key 'n_particles': must be >= 1");
    if (cfg.ridge < 0.0) result.errors.push_back("key 'ridge': must be nonnegative");
    if (cfg.basis_degree < 0) result.errors.push_back("key 'basis_degree': must be >= 0");
    if (cfg.threads == 0) result.errors.push_back("key 'threads': must be >= 1");
    if (!(cfg.u_lo < cfg.u_hi))
        result.errors.push_back("keys 'u_lo'/'u_hi': control interval must be nonempty");

    if (cfg.T > 0.0 && cfg.dt > 0.0) {
        const double ratio_T = cfg.T / cfg.dt;
        if (std::abs(ratio_T - std::round(ratio_T)) > 1e-9) {
            std::ostringstream os;
            os << "keys 'T'/'dt': T/dt = " << ratio_T << " is not an integer (T = " << cfg.T
               << ", dt = " << cfg.dt << ")";
            result.errors.push_back(os.str());
        }
        const double ratio_d = cfg.delta / cfg.dt;
        if (std::abs(ratio_d - std::round(ratio_d)) > 1e-9) {
            std::ostringstream os;
            os << "keys 'delta'/'dt': delta/dt = " << ratio_d
               << " is not an integer (delta = " << cfg.delta << ", dt = " << cfg.dt << ")";
            result.errors.push_back(os.str());
        }
    }
    if (cfg.flow.mode == InformationFlow::Mode::DelayedInfo && cfg.dt > 0.0) {
        const double ratio = cfg.flow.lag / cfg.dt;
        if (cfg.flow.lag < 0.0 || std::abs(ratio - std::round(ratio)) > 1e-9)
            result.errors.push_back("key 'info_mode': lag must be a nonnegative multiple of dt");
    }

    for (const std::string& check : cfg.checks) {
        if (!kChecks.count(check)) {
            result.errors.push_back("key 'checks': unknown check '" + check + "'");
            continue;
        }
        if ((check == "lambda" || check == "p" || check == "transversality") &&
            cfg.model != "recursive_utility") {
            result.errors.push_back("key 'checks': check '" + check +
                                    "' requires model recursive_utility");
        }
        if (check == "jumps" && cfg.model != "jump_martingale") {
            result.errors.push_back("key 'checks': check 'jumps' requires model "
                                    "jump_martingale");
        }
    }

    if (cfg.jump_marks.size() != cfg.jump_weights.size()) {
        result.errors.push_back(
            "keys 'jump_marks'/'jump_weights': lists must have equal length");
    } else if (!cfg.jump_marks.empty()) {
        try {
            JumpSpec probe(cfg.jump_marks, cfg.jump_weights);
        } catch (const PreconditionError& e) {
            result.errors.push_back(std::string("keys 'jump_marks'/'jump_weights': ") +
                                    e.what());
        }
    }

    if (cfg.model == "expression") {
        const std::size_t n_measures = cfg.delay_measures.size();
        for (const auto& [name, text] :
             {std::pair<const char*, const std::string&>{"b", cfg.expr_b},
              {"sigma", cfg.expr_sigma},
              {"gamma", cfg.expr_gamma},
              {"g", cfg.expr_g},
              {"f", cfg.expr_f},
              {"h1", cfg.expr_h1},
              {"h", cfg.expr_h}}) {
            try {
                const Expression expr = Expression::parse(text);
                if (expr.max_x_index() > n_measures) {
                    result.errors.push_back(std::string("key '") + name + "': uses x" +
                                            std::to_string(expr.max_x_index()) + " but only " +
                                            std::to_string(n_measures) +
                                            " delay measures are configured");
                }
            } catch (const PreconditionError& e) {
                result.errors.push_back(std::string("key '") + name + "': " + e.what());
            }
        }
        if (!cfg.expr_x0.empty()) {
            try {
                Expression::parse(cfg.expr_x0);
            } catch (const PreconditionError& e) {
                result.errors.push_back(std::string("key 'x0_expr': ") + e.what());
            }
        }
    }

    // delay measure syntax (delta/dt alignment surfaces at build time)
    if (cfg.dt > 0.0) {
        for (const std::string& m : cfg.delay_measures) {
            try {
                parse_measure(m, std::max(cfg.delta, cfg.dt), cfg.dt);
            } catch (const std::exception& e) {
                result.errors.push_back(std::string("key 'delay_measures': ") + e.what());
            }
        }
    }

    if (cfg.model == "recursive_utility" &&
        std::find(cfg.checks.begin(), cfg.checks.end(), "transversality") != cfg.checks.end() &&
        cfg.c >= cfg.alpha - cfg.beta) {
        result.warnings.push_back(
            "decay condition violated: c < alpha - beta required for the transversality "
            "pairing to vanish; the check will report the divergence");
    }

    if (result.errors.empty()) result.config = cfg;
    return result;
}

ParseResult parse_config_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        ParseResult result;
        result.errors.push_back("cannot read config file '" + path + "'");
        return result;
    }
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return parse_config_text(buffer.str());
}

ConsumptionModel consumption_params(const ExperimentConfig& cfg) {
    ConsumptionModel cm;
    cm.x_init = cfg.x0;
    cm.c = cfg.c;
    cm.alpha = cfg.alpha;
    cm.beta = cfg.beta;
    cm.sigma0 = cfg.sigma0;
    cm.delta = cfg.delta;
    cm.T_max = cfg.T;
    cm.kappa = cfg.kappa;
    cm.pi0 = cfg.pi0;
    cm.U = Interval{cfg.u_lo, cfg.u_hi};
    if (!cfg.jump_marks.empty()) {
        cm.jumps = JumpSpec(cfg.jump_marks, cfg.jump_weights);
        cm.gamma_scale = 1.0;
    }
    return cm;
}

CoefficientModel build_model(const ExperimentConfig& cfg) {
    CoefficientModel model;
    if (cfg.model == "recursive_utility") {
        model = make_consumption_model(consumption_params(cfg));
    } else if (cfg.model == "linear_toy") {
        LinearToyParams p;
        p.c1 = cfg.c1;
        p.c2 = cfg.c2;
        p.cu = cfg.cu;
        p.sigma0 = cfg.sigma0;
        p.gy = cfg.gy;
        p.h1y = cfg.h1y;
        p.h2x = cfg.h2x;
        p.a = cfg.a;
        p.delta = cfg.delta;
        p.T = cfg.T;
        p.x_init = cfg.x0;
        p.u_lo = cfg.u_lo;
        p.u_hi = cfg.u_hi;
        model = make_linear_toy(p);
    } else if (cfg.model == "jump_martingale") {
        JumpMartingaleParams p;
        p.x_init = cfg.x0;
        p.marks = cfg.jump_marks;
        p.weights = cfg.jump_weights;
        p.T = cfg.T;
        model = make_jump_martingale(p);
    } else if (cfg.model == "brownian_bsde") {
        BrownianBsdeParams p;
        p.T = cfg.T;
        p.x_init = cfg.x0;
        p.a = cfg.a;
        model = make_brownian_bsde(p);
    } else { // expression
        const bool m_is_phi = !cfg.infinite_horizon;
        std::vector<DelayMeasure> measures;
        for (const std::string& m : cfg.delay_measures)
            measures.push_back(parse_measure(m, std::max(cfg.delta, cfg.dt), cfg.dt));
        model.delay = DelaySpec(cfg.delta, std::move(measures));
        model.b = coefficient_from_expression(Expression::parse(cfg.expr_b), m_is_phi);
        model.sigma = coefficient_from_expression(Expression::parse(cfg.expr_sigma), m_is_phi);
        model.gamma =
            jump_coefficient_from_expression(Expression::parse(cfg.expr_gamma), m_is_phi);
        model.g = coefficient_from_expression(Expression::parse(cfg.expr_g), m_is_phi);
        model.f = coefficient_from_expression(Expression::parse(cfg.expr_f), m_is_phi);
        model.h1 = utility_from_expression(Expression::parse(cfg.expr_h1));
        model.h = utility_from_expression(Expression::parse(cfg.expr_h));
        const double h2x = cfg.h2x;
        model.h2.value = [h2x](double x, double) { return h2x * x; };
        model.h2.dx = [h2x](double, double) { return h2x; };
        model.Phi.value = [](double x) { return x; };
        model.Phi.deriv = [](double) { return 1.0; };
        model.psi = model.Phi;
        model.a = cfg.a;
        model.U = Interval{cfg.u_lo, cfg.u_hi};
        if (!cfg.jump_marks.empty()) model.jumps = JumpSpec(cfg.jump_marks, cfg.jump_weights);
        if (cfg.expr_x0.empty()) {
            const double xi = cfg.x0;
            model.x0 = [xi](double) { return xi; };
        } else {
            const Expression x0e = Expression::parse(cfg.expr_x0);
            model.x0 = [x0e](double t) {
                CoeffArgs a;
                a.t = t;
                return x0e.eval(a, false);
            };
        }
    }

    if (cfg.infinite_horizon) {
        model.horizon = InfiniteHorizon{cfg.T, cfg.kappa};
    } else {
        model.horizon = FiniteHorizon{cfg.T};
    }

    // On non-expression models the delay spec comes from the builders above;
    // honor an explicit delay_measures override for them as well.
    if (cfg.model != "expression" &&
        !(cfg.delay_measures.size() == 1 && cfg.delay_measures[0] == "dirac0")) {
        std::vector<DelayMeasure> measures;
        for (const std::string& m : cfg.delay_measures)
            measures.push_back(parse_measure(m, std::max(cfg.delta, cfg.dt), cfg.dt));
        model.delay = DelaySpec(cfg.delta, std::move(measures));
    }
    return model;
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "model=" << model << "\nhorizon=" << (infinite_horizon ? "infinite" : "finite")
       << "\nT=" << T << "\ndt=" << dt << "\ndelta=" << delta << "\nkappa=" << kappa
       << "\nn_particles=" << n_particles << "\nseed=" << seed
       << "\nbasis_degree=" << basis_degree << "\nbasis_lifts=" << basis_lifts
       << "\nridge=" << ridge << "\ninfo_mode="
       << (flow.mode == InformationFlow::Mode::FullInfo ? "full" : "delayed") << ":" << flow.lag
       << "\nchecks=";
    for (const auto& c : checks) os << c << ",";
    os << "\nu=[" << u_lo << "," << u_hi << "]\ncontrol=" << control_value << "\nmeasures=";
    for (const auto& m : delay_measures) os << m << ",";
    os << "\nmarks=";
    for (double v : jump_marks) os << v << ",";
    os << "\nweights=";
    for (double v : jump_weights) os << v << ",";
    os << "\nT_list=";
    for (double v : T_list) os << v << ",";
    os << "\nx0=" << x0 << "\nc=" << c << "\nalpha=" << alpha << "\nbeta=" << beta
       << "\npi0=" << pi0 << "\nsigma0=" << sigma0 << "\nc1=" << c1 << "\nc2=" << c2
       << "\ncu=" << cu << "\ngy=" << gy << "\nh1y=" << h1y << "\nh2x=" << h2x << "\na=" << a
       << "\nexpr_b=" << expr_b << "\nexpr_sigma=" << expr_sigma << "\nexpr_gamma=" << expr_gamma
       << "\nexpr_g=" << expr_g << "\nexpr_f=" << expr_f << "\nexpr_h1=" << expr_h1
       << "\nexpr_h=" << expr_h << "\nexpr_x0=" << expr_x0 << "\ntol_residual=" << tol_residual
       << "\ntol_gradient=" << tol_gradient
       << "\ntol_transversality_rel=" << tol_transversality_rel << "\ntol_scaling=["
       << tol_scaling_lo << "," << tol_scaling_hi << "]\ntol_fubini=" << tol_fubini
       << "\ntol_hamiltonian=" << tol_hamiltonian << "\ns_fd=" << s_fd
       << "\ngradient_bumps=" << gradient_bumps << "\nn_probe=" << n_probe << "\n";
    return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    const std::string text = config.canonical();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

} // namespace mfdelay
