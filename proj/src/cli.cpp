#include "cuspfem/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "cuspfem/decomposition.hpp"
#include "cuspfem/errors.hpp"
#include "cuspfem/fem.hpp"
#include "cuspfem/mesh.hpp"
#include "cuspfem/spectral.hpp"
#include "cuspfem/trace_spaces.hpp"

namespace cuspfem::cli {

using nlohmann::json;

std::string to_string(Command command) {
    switch (command) {
        case Command::Solve: return "solve";
        case Command::TraceSvd: return "trace-svd";
        case Command::Decompose: return "decompose";
        case Command::TraceNorm: return "trace-norm";
        case Command::Convergence: return "convergence";
    }
    return "?";
}

Command parse_command(const std::string& name) {
    for (Command c : {Command::Solve, Command::TraceSvd, Command::Decompose, Command::TraceNorm, Command::Convergence}) {
        if (to_string(c) == name) return c;
    }
    throw InvalidArgument("unknown command '" + name + "'");
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

namespace {

// Raised when a computed quantity violates an asserted threshold (exit 3).
class AssertionFailure : public Error {
public:
    using Error::Error;
};

// ---- config access -------------------------------------------------------

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw InvalidArgument(fmt::format("field '{}' must be an object", path));
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        if (!ok.count(key)) throw InvalidArgument(fmt::format("unknown field '{}{}{}'", path, path.empty() ? "" : ".", key));
    }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

const json& require(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) throw InvalidArgument(fmt::format("missing field '{}'", join(path, key)));
    return obj.at(key);
}

double number(const json& obj, const std::string& path, const char* key, std::optional<double> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw InvalidArgument(fmt::format("missing field '{}'", join(path, key)));
    }
    const json& v = obj.at(key);
    if (!v.is_number()) throw InvalidArgument(fmt::format("field '{}' must be a number", join(path, key)));
    return v.get<double>();
}

int integer(const json& obj, const std::string& path, const char* key, std::optional<int> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw InvalidArgument(fmt::format("missing field '{}'", join(path, key)));
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw InvalidArgument(fmt::format("field '{}' must be an integer", join(path, key)));
    return v.get<int>();
}

std::optional<double> optional_number(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    return number(obj, path, key);
}

std::string string(const json& obj, const std::string& path, const char* key, std::optional<std::string> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw InvalidArgument(fmt::format("missing field '{}'", join(path, key)));
    }
    const json& v = obj.at(key);
    if (!v.is_string()) throw InvalidArgument(fmt::format("field '{}' must be a string", join(path, key)));
    return v.get<std::string>();
}

std::vector<std::string> string_list(const json& obj, const std::string& path, const char* key) {
    const json& v = require(obj, path, key);
    if (!v.is_array() || v.empty()) throw InvalidArgument(fmt::format("field '{}' must be a non-empty array", join(path, key)));
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw InvalidArgument(fmt::format("field '{}' must contain strings", join(path, key)));
        out.push_back(e.get<std::string>());
    }
    return out;
}

Expr expression(const json& obj, const std::string& path, const char* key, const char* fallback) {
    const std::string text = string(obj, path, key, std::string(fallback));
    try {
        return Expr::parse(text);
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(fmt::format("field '{}': {}", join(path, key), e.what()));
    }
}

struct MeshSettings {
    double h0 = 0.2;
    double grading = 2.0;
    int levels = 0;  // uniform refinements applied after generation
};

MeshSettings mesh_settings(const json& root, int default_levels) {
    MeshSettings m;
    m.levels = default_levels;
    if (!root.contains("mesh")) return m;
    const json& j = root.at("mesh");
    check_keys(j, "mesh", {"h0", "grading", "levels"});
    m.h0 = number(j, "mesh", "h0", m.h0);
    m.grading = number(j, "mesh", "grading", m.grading);
    m.levels = integer(j, "mesh", "levels", m.levels);
    if (!(m.h0 > 0 && m.h0 < 0.5)) throw InvalidArgument("field 'mesh.h0' must lie in (0, 0.5)");
    if (!(m.grading >= 1)) throw InvalidArgument("field 'mesh.grading' must be >= 1");
    if (m.levels < 0 || m.levels > 4) throw InvalidArgument("field 'mesh.levels' must lie in [0, 4]");
    return m;
}

CuspDomain domain_of(const json& root) {
    const json& d = require(root, "", "domain");
    check_keys(d, "domain", {"profile", "tip_cutoff"});
    return domain_from_json(d);
}

CoefficientExprs coefficient_exprs(const json& root, bool data_required) {
    CoefficientExprs c;
    json j = root.contains("coefficients") ? root.at("coefficients") : json::object();
    if (data_required) {
        check_keys(j, "coefficients", {"a11", "a12", "a22", "b1", "b2", "a", "f", "sigma", "mu"});
    } else {
        check_keys(j, "coefficients", {"a11", "a12", "a22", "b1", "b2", "a", "sigma"});
    }
    const std::string p = "coefficients";
    c.a11 = expression(j, p, "a11", "1");
    c.a12 = expression(j, p, "a12", "0");
    c.a22 = expression(j, p, "a22", "1");
    c.b1 = expression(j, p, "b1", "0");
    c.b2 = expression(j, p, "b2", "0");
    c.a = expression(j, p, "a", "0");
    c.sigma = expression(j, p, "sigma", "0");
    if (data_required) {
        c.f = expression(j, p, "f", "0");
        c.mu = expression(j, p, "mu", "0");
    }
    return c;
}

std::vector<Mesh> build_meshes(const CuspDomain& domain, const MeshSettings& s) {
    std::vector<Mesh> meshes{generate_graded_mesh(domain, s.h0, s.grading)};
    for (int l = 0; l < s.levels; ++l) meshes.push_back(refine(meshes.back(), domain));
    return meshes;
}

// ---- output --------------------------------------------------------------

class Outputs {
public:
    explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("cannot write " + path.string());
        os << content;
        if (!os) throw Error("cannot write " + path.string());
        files_[name] = sha256_hex(content);
    }
    const std::map<std::string, std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> files_;
};

std::string g17(double v) {
    if (std::isnan(v)) return "nan";
    return fmt::format("{:.17g}", v);
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Context {
    Context(const RunConfig& c, std::ostream& l) : config(c), log(l), outputs(c.output_dir) {}

    const RunConfig& config;
    std::ostream& log;
    Outputs outputs;
    json thresholds = json::object();
    json report = json::object();

    void info(const std::string& msg) const {
        if (!config.quiet) log << msg << '\n';
    }
    void check(bool ok, const std::string& name, const std::string& detail) {
        report["assertions"][name] = ok;
        if (!ok) failures.push_back(name + ": " + detail);
    }
    std::vector<std::string> failures;
};

// ---- commands ------------------------------------------------------------

void run_solve(const json& root, Context& ctx) {
    check_keys(root, "", {"domain", "mesh", "coefficients", "solver"});
    const CuspDomain domain = domain_of(root);
    const MeshSettings ms = mesh_settings(root, 0);
    const CoefficientExprs exprs = coefficient_exprs(root, true);
    double tol = 1e-8;
    if (root.contains("solver")) {
        check_keys(root.at("solver"), "solver", {"tol"});
        tol = number(root.at("solver"), "solver", "tol", tol);
    }
    if (!(tol > 0 && tol < 1)) throw InvalidArgument("field 'solver.tol' must lie in (0, 1)");
    ctx.thresholds["solver.tol"] = tol;
    ctx.thresholds["residual_relative"] = kResidualTolerance;
    ctx.thresholds["functional_bound_tolerance"] = 1e-10;
    ctx.thresholds["functional_bound_samples"] = 20;

    const Mesh mesh = build_meshes(domain, ms).back();
    ctx.info(fmt::format("mesh: {} nodes, {} triangles", mesh.num_nodes(), mesh.num_triangles()));
    const DiscreteSystem sys = assemble(mesh, exprs.bind(domain), domain);
    const SolveResult result = solve(sys, tol);

    json& r = ctx.report;
    r["nodes"] = mesh.num_nodes();
    r["C1"] = sys.admissibility.c1;
    r["C2"] = sys.admissibility.c2;
    r["M_sigma"] = sys.admissibility.m_sigma;
    r["mu_weighted_sq"] = sys.admissibility.mu_weighted_sq;
    const Eigen::VectorXd* u = nullptr;
    if (const auto* uniq = std::get_if<UniqueSolution>(&result)) {
        r["verdict"] = "unique";
        r["residual"] = uniq->residual;
        r["sigma_min_estimate"] = uniq->sigma_min;
        r["sigma_max_estimate"] = uniq->sigma_max;
        r["kernel_dim"] = 0;
        u = &uniq->u;
    } else {
        const auto& fr = std::get<FredholmReport>(result);
        r["verdict"] = fr.verdict();
        r["kernel_dim"] = fr.kernel_dim();
        r["compatibility_residual"] = fr.compatibility_residual;
        r["sigma_min"] = fr.sigma_min;
        r["sigma_max"] = fr.sigma_max;
        if (fr.solution) {
            r["residual"] = fr.residual;
            u = &*fr.solution;
        } else {
            r["residual"] = nullptr;
        }
    }
    const double bnorm = sys.load.norm();
    if (u) {
        const double res = (sys.matrix * *u - sys.load).norm();
        ctx.check(res <= kResidualTolerance * bnorm, "residual", fmt::format("{:.3e} > 1e-10 * {:.3e}", res, bnorm));
    }
    const FunctionalBoundCheck fb = check_functional_bounds(sys, 20, ctx.config.seed);
    r["functional_bounds"] = {{"samples", fb.samples},
                              {"worst_l3_ratio", fb.worst_l3_ratio},
                              {"worst_l4_ratio", fb.worst_l4_ratio},
                              {"passed", fb.passed}};
    ctx.check(fb.passed, "functional_bounds", "Cauchy-Bunyakovski bound violated");

    std::string csv = "node_index,x1,x2,u\n";
    if (u) {
        for (int i = 0; i < mesh.num_nodes(); ++i) {
            csv += fmt::format("{},{},{},{}\n", i, g17(mesh.nodes[i].x()), g17(mesh.nodes[i].y()), g17((*u)[i]));
        }
    }
    ctx.outputs.write("solution.csv", csv);
    ctx.info(fmt::format("verdict: {}", r["verdict"].get<std::string>()));
}

void run_trace_svd(const json& root, Context& ctx) {
    check_keys(root, "", {"domain", "mesh", "spectral"});
    const CuspDomain domain = domain_of(root);
    MeshSettings ms = mesh_settings(root, 0);
    json sp = root.contains("spectral") ? root.at("spectral") : json::object();
    check_keys(sp, "spectral", {"levels", "k", "decay_threshold", "stability_tolerance", "require_unweighted_growth"});
    const int levels = integer(sp, "spectral", "levels", 4);
    const int k = integer(sp, "spectral", "k", 30);
    if (levels < 1 || levels > 4) throw InvalidArgument("field 'spectral.levels' must lie in [1, 4]");
    if (k < 1) throw InvalidArgument("field 'spectral.k' must be >= 1");
    const auto decay_threshold = optional_number(sp, "spectral", "decay_threshold");
    const auto stability = optional_number(sp, "spectral", "stability_tolerance");
    bool growth = false;
    if (sp.contains("require_unweighted_growth")) {
        if (!sp.at("require_unweighted_growth").is_boolean()) {
            throw InvalidArgument("field 'spectral.require_unweighted_growth' must be a boolean");
        }
        growth = sp.at("require_unweighted_growth").get<bool>();
    }

    const Mesh base = build_meshes(domain, ms).back();
    const CompactnessReport rep = compactness_report(domain, base, levels, k);

    std::ostringstream csv;
    write_spectrum_csv(csv, rep);
    ctx.outputs.write("spectrum.csv", csv.str());
    std::string tip = "level,delta,fraction\n";
    for (const auto& l : rep.levels) {
        for (const auto& t : l.tip) tip += fmt::format("{},{},{}\n", l.level, g17(t.delta), g17(t.fraction));
    }
    ctx.outputs.write("tip_localization.csv", tip);

    json& r = ctx.report;
    r["C_emb"] = rep.c_emb;
    r["decay_ratio_k25"] = num_or_null(rep.decay_ratio_k25);
    r["unweighted_top_by_level"] = rep.unweighted_top_by_level;
    json wtop = json::array();
    for (const auto& l : rep.levels) wtop.push_back(l.weighted.singular_values.front());
    r["weighted_top_by_level"] = wtop;
    json lv = json::array();
    for (const auto& l : rep.levels) {
        lv.push_back({{"level", l.level}, {"nodes", l.nodes}, {"boundary_nodes", l.boundary_nodes},
                      {"padded", l.weighted.padded}});
    }
    r["levels"] = lv;

    for (const auto& l : rep.levels) {
        for (const TraceSpectrum* s : {&l.weighted, &l.unweighted}) {
            bool sorted = true;
            for (std::size_t j = 0; j < s->singular_values.size(); ++j) {
                if (s->singular_values[j] < 0 || (j > 0 && s->singular_values[j] > s->singular_values[j - 1])) sorted = false;
            }
            ctx.check(sorted, fmt::format("sorted_level{}_{}", l.level, to_string(s->mode)), "spectrum not sorted");
        }
    }
    if (stability && rep.levels.size() >= 2) {
        ctx.thresholds["spectral.stability_tolerance"] = *stability;
        const double a = rep.levels[rep.levels.size() - 2].weighted.singular_values.front();
        const double b = rep.levels.back().weighted.singular_values.front();
        const double change = std::abs(b - a) / a;
        r["weighted_s1_last_change"] = change;
        ctx.check(change < *stability, "weighted_s1_stability", fmt::format("{:.4g} >= {:.4g}", change, *stability));
    }
    if (decay_threshold) {
        ctx.thresholds["spectral.decay_threshold"] = *decay_threshold;
        ctx.check(std::isfinite(rep.decay_ratio_k25) && rep.decay_ratio_k25 < *decay_threshold, "decay_ratio_k25",
                  fmt::format("{:.4g} vs {:.4g}", rep.decay_ratio_k25, *decay_threshold));
    }
    if (growth) {
        ctx.thresholds["spectral.require_unweighted_growth"] = true;
        bool inc = true;
        for (std::size_t l = 1; l < rep.unweighted_top_by_level.size(); ++l) {
            if (!(rep.unweighted_top_by_level[l] > rep.unweighted_top_by_level[l - 1])) inc = false;
        }
        ctx.check(inc, "unweighted_growth", "unweighted s_1 does not increase strictly");
    }

    // C_emb bounds the weighted trace of random discrete functions on the finest mesh
    ctx.thresholds["embedding_bound_tolerance"] = 1e-9;
    Mesh finest = base;
    for (int l = 1; l < levels; ++l) finest = refine(finest, domain);
    const DiscreteSystem sys = gram_system(finest, domain);
    std::mt19937_64 rng(ctx.config.seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double worst = 0;
    for (int s = 0; s < 20; ++s) {
        Eigen::VectorXd u(finest.num_nodes());
        for (int i = 0; i < u.size(); ++i) u[i] = dist(rng);
        const double lhs = std::sqrt(u.dot(sys.boundary_gram_weighted * u));
        const double rhs = rep.c_emb * std::sqrt(u.dot(sys.h1_gram * u));
        worst = std::max(worst, lhs / rhs);
    }
    r["embedding_bound_worst_ratio"] = worst;
    ctx.check(worst <= 1.0 + 1e-9, "embedding_bound", fmt::format("ratio {:.12g}", worst));
    ctx.info(fmt::format("C_emb = {:.6g}, s25/s1 = {:.4g}", rep.c_emb, rep.decay_ratio_k25));
}

void run_decompose(const json& root, Context& ctx) {
    check_keys(root, "", {"domain", "decomposition"});
    const CuspDomain domain = domain_of(root);
    const json& dj = require(root, "", "decomposition");
    check_keys(dj, "decomposition", {"fields", "p", "eps_low", "x_max", "bound"});
    const auto fields = string_list(dj, "decomposition", "fields");
    const double p = number(dj, "decomposition", "p", 2.0);
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("field 'decomposition.p' must satisfy 1 < p < inf");
    PeakRegionRule rule;
    rule.eps_low = number(dj, "decomposition", "eps_low", rule.eps_low);
    rule.x_max = number(dj, "decomposition", "x_max", rule.x_max);
    if (!(rule.eps_low > 0 && rule.x_max > rule.eps_low)) {
        throw InvalidArgument("fields 'decomposition.eps_low' and 'decomposition.x_max' need 0 < eps_low < x_max");
    }
    const double top = rule.x_max + domain.profile()(rule.x_max);
    if (!(top < 1.0)) throw InvalidArgument("field 'decomposition.x_max': window x_max + phi(x_max) must stay below 1");
    if (rule.eps_low < domain.tip_cutoff()) {
        throw InvalidArgument("field 'decomposition.eps_low' must not lie below domain.tip_cutoff");
    }
    const auto bound = optional_number(dj, "decomposition", "bound");
    std::vector<std::unique_ptr<SampledField>> parsed;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        try {
            parsed.push_back(make_field(domain, fields[i]));
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(fmt::format("field 'decomposition.fields[{}]': {}", i, e.what()));
        }
    }

    const MollifierPair moll = make_standard_mollifiers();
    json list = json::array();
    std::string csv = "field,p,eps_low,norm_F,norm_phiinvR,ratio\n";
    double worst = 0;
    for (const auto& F : parsed) {
        const DecompositionCheck d = check_decomposition_bound(*F, domain, p, moll, rule);
        list.push_back({{"field", d.field}, {"p", d.p}, {"ratio", d.ratio ? json(*d.ratio) : json(nullptr)},
                        {"norm_F", d.norm_F}, {"norm_phiinvR", d.norm_phiinvR}, {"eps_low", d.eps_low}});
        csv += fmt::format("\"{}\",{},{},{},{},{}\n", d.field, g17(d.p), g17(d.eps_low), g17(d.norm_F),
                           g17(d.norm_phiinvR), d.ratio ? g17(*d.ratio) : std::string("undefined"));
        if (d.ratio) worst = std::max(worst, *d.ratio);
    }
    ctx.report["m_K"] = moll.m_K;
    ctx.report["fields"] = list;
    ctx.report["max_ratio"] = worst;
    if (bound) {
        ctx.thresholds["decomposition.bound"] = *bound;
        ctx.check(worst <= *bound, "decomposition_bound", fmt::format("max ratio {:.6g} > {:.6g}", worst, *bound));
    }
    ctx.outputs.write("decomposition.csv", csv);
    ctx.outputs.write("decomposition.json", list.dump(2) + "\n");
    ctx.info(fmt::format("max ratio {:.6g} over {} fields", worst, parsed.size()));
}

void run_trace_norm(const json& root, Context& ctx) {
    check_keys(root, "", {"domain", "trace"});
    const CuspDomain domain = domain_of(root);
    const json& tj = require(root, "", "trace");
    check_keys(tj, "trace", {"fields", "p", "density", "self_convergence_tolerance"});
    const auto fields = string_list(tj, "trace", "fields");
    const double p = number(tj, "trace", "p", 2.0);
    const int density = integer(tj, "trace", "density", 16);
    if (!(p > 1.0)) throw InvalidArgument("field 'trace.p' must be > 1");
    if (density < 4 || density > 256) throw InvalidArgument("field 'trace.density' must lie in [4, 256]");
    const auto tol = optional_number(tj, "trace", "self_convergence_tolerance");
    std::vector<std::unique_ptr<SampledField>> parsed;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        try {
            parsed.push_back(make_field(domain, fields[i]));
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(fmt::format("field 'trace.fields[{}]': {}", i, e.what()));
        }
    }

    json list = json::array();
    std::string csv = "field,p,density,nodes,weighted_part,seminorm_part,trace_norm\n";
    double worst_change = 0;
    for (const auto& F : parsed) {
        auto eval = [&F](const Vec2& x) { return F->value(x); };
        const TraceNormParts coarse = trace_norm_parts(sample_boundary(domain, density, eval), p, ctx.config.threads);
        const TraceNormParts fine = trace_norm_parts(sample_boundary(domain, 2 * density, eval), p, ctx.config.threads);
        const double change = coarse.trace_norm > 0 ? std::abs(fine.trace_norm - coarse.trace_norm) / coarse.trace_norm : 0.0;
        worst_change = std::max(worst_change, change);
        for (const auto& [dens, parts] : {std::pair{density, coarse}, std::pair{2 * density, fine}}) {
            csv += fmt::format("\"{}\",{},{},{},{},{},{}\n", F->name(), g17(p), dens, parts.nodes, g17(parts.weighted_part),
                               g17(parts.seminorm_part), g17(parts.trace_norm));
        }
        list.push_back({{"field", F->name()},
                        {"p", p},
                        {"weighted_part", coarse.weighted_part},
                        {"seminorm_part", coarse.seminorm_part},
                        {"trace_norm", coarse.trace_norm},
                        {"nodes", coarse.nodes},
                        {"trace_norm_double_density", fine.trace_norm},
                        {"relative_change", change}});
    }
    ctx.report["fields"] = list;
    ctx.report["max_relative_change"] = worst_change;
    if (tol) {
        ctx.thresholds["trace.self_convergence_tolerance"] = *tol;
        ctx.check(worst_change < *tol, "self_convergence", fmt::format("{:.4g} >= {:.4g}", worst_change, *tol));
    }
    ctx.outputs.write("trace_norm.csv", csv);
    ctx.outputs.write("trace_norm.json", list.dump(2) + "\n");
}

void run_convergence(const json& root, Context& ctx) {
    check_keys(root, "", {"domain", "mesh", "coefficients", "u_exact", "solver", "order_range"});
    const CuspDomain domain = domain_of(root);
    const MeshSettings ms = mesh_settings(root, 2);
    const CoefficientExprs exprs = coefficient_exprs(root, false);
    const Expr u = expression(root, "", "u_exact", "");
    double tol = 1e-8;
    if (root.contains("solver")) {
        check_keys(root.at("solver"), "solver", {"tol"});
        tol = number(root.at("solver"), "solver", "tol", tol);
    }
    std::optional<std::pair<double, double>> range;
    if (root.contains("order_range")) {
        const json& o = root.at("order_range");
        if (!o.is_array() || o.size() != 2 || !o[0].is_number() || !o[1].is_number()) {
            throw InvalidArgument("field 'order_range' must be [min, max]");
        }
        range = {o[0].get<double>(), o[1].get<double>()};
    }
    if (ms.levels < 1) throw InvalidArgument("field 'mesh.levels' must be >= 1 for a convergence study");

    const std::vector<Mesh> meshes = build_meshes(domain, ms);
    const std::vector<ErrorRecord> errs = manufactured_solution_error(domain, exprs, u, meshes, tol);
    std::string csv = "level,h,nodes,l2_error,h1_error,l2_order\n";
    json rows = json::array();
    for (std::size_t l = 0; l < errs.size(); ++l) {
        const double order = l ? observed_order(errs[l - 1], errs[l]) : std::nan("");
        csv += fmt::format("{},{},{},{},{},{}\n", l, g17(errs[l].h), errs[l].nodes, g17(errs[l].l2_error),
                           g17(errs[l].h1_error), l ? g17(order) : std::string(""));
        rows.push_back({{"level", l}, {"h", errs[l].h}, {"nodes", errs[l].nodes}, {"l2_error", errs[l].l2_error},
                        {"h1_error", errs[l].h1_error}, {"l2_order", l ? num_or_null(order) : json(nullptr)}});
    }
    ctx.report["levels"] = rows;
    if (range) {
        ctx.thresholds["order_range"] = {range->first, range->second};
        const double last = observed_order(errs[errs.size() - 2], errs.back());
        ctx.check(last >= range->first && last <= range->second, "observed_order",
                  fmt::format("{:.4g} outside [{}, {}]", last, range->first, range->second));
        bool monotone = true;
        for (std::size_t l = 1; l < errs.size(); ++l) monotone = monotone && errs[l].l2_error < errs[l - 1].l2_error;
        ctx.check(monotone, "monotone_l2_decay", "L2 error did not decrease at every level");
    }
    ctx.outputs.write("convergence.csv", csv);
}

json versions() {
    return {{"cuspfem", "1.0.0"},
            {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"fmt", FMT_VERSION},
            {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                          NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}};
}

}  // namespace

int run(const RunConfig& config, std::ostream& log) {
    std::string text;
    json root;
    try {
        std::ifstream is(config.config_path, std::ios::binary);
        if (!is) throw InvalidArgument("cannot read config file '" + config.config_path.string() + "'");
        std::ostringstream ss;
        ss << is.rdbuf();
        text = ss.str();
        try {
            root = json::parse(text);
        } catch (const json::parse_error& e) {
            throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
        }
        if (!root.is_object()) throw InvalidArgument("config must be a JSON object");
        if (config.threads < 1) throw InvalidArgument("--threads must be >= 1");
        std::error_code ec;
        std::filesystem::create_directories(config.output_dir, ec);
        if (ec) throw InvalidArgument("cannot create output directory '" + config.output_dir.string() + "'");
    } catch (const InvalidArgument& e) {
        log << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    Context ctx(config, log);
    int status = kExitOk;
    try {
        switch (config.command) {
            case Command::Solve: run_solve(root, ctx); break;
            case Command::TraceSvd: run_trace_svd(root, ctx); break;
            case Command::Decompose: run_decompose(root, ctx); break;
            case Command::TraceNorm: run_trace_norm(root, ctx); break;
            case Command::Convergence: run_convergence(root, ctx); break;
        }
        if (!ctx.failures.empty()) {
            for (const auto& f : ctx.failures) log << "assertion failed: " << f << '\n';
            status = kExitAssertion;
        }
    } catch (const ValidationError& e) {
        log << "validation failed (" << e.condition() << "): " << e.what() << '\n';
        ctx.report["validation_failure"] = e.condition();
        status = kExitValidation;
    } catch (const InvalidArgument& e) {
        log << "error: " << e.what() << '\n';
        status = kExitValidation;
    } catch (const MeshingError& e) {
        log << "error: meshing failed at " << e.region() << ": " << e.what() << '\n';
        status = kExitValidation;
    } catch (const WindowOutOfDomain& e) {
        log << "error: " << e.what() << '\n';
        status = kExitValidation;
    } catch (const std::exception& e) {
        log << "failure: " << e.what() << '\n';
        status = kExitAssertion;
    }

    try {
        ctx.report["command"] = to_string(config.command);
        ctx.report["exit_status"] = status;
        ctx.outputs.write("report.json", ctx.report.dump(2) + "\n");
        json manifest = {{"command", to_string(config.command)},
                         {"config_path", config.config_path.string()},
                         {"config_sha256", sha256_hex(text)},
                         {"seed", config.seed},
                         {"threads", config.threads},
                         {"versions", versions()},
                         {"thresholds", ctx.thresholds},
                         {"exit_status", status}};
        json files = json::object();
        for (const auto& [name, hash] : ctx.outputs.files()) files[name] = hash;
        manifest["outputs"] = files;
        Outputs(config.output_dir).write("manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        if (status == kExitOk) status = kExitAssertion;
    }
    return status;
}

}  // namespace cuspfem::cli
