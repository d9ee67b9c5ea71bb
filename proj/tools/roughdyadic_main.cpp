// Command-line front end: path simulation, lemma verification sweeps,
// Wong-Zakai solving and rough-integration demos, report aggregation.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "roughdyadic/lift.hpp"
#include "roughdyadic/path.hpp"
#include "roughdyadic/report.hpp"
#include "roughdyadic/rough_integral.hpp"
#include "roughdyadic/variation.hpp"
#include "roughdyadic/verify.hpp"
#include "roughdyadic/wong_zakai.hpp"

namespace fs = std::filesystem;
using namespace roughdyadic;

namespace {

struct Options {
    int dim = 2;
    int resolution = 12;
    std::uint64_t seed = 1;
    double p = 2.5;
    double gamma = 0.5;
    int n_max = 12;
    std::string tail = "analytic";
    std::vector<std::string> lemmas;
    std::string m_range = "2..10";
    std::string n_range = "1..10";
    long samples = 10000;
    double q = 2.0;
    double beta = 0.01;
    double theta = 0.5;
    double delta = 1.0;
    double eps = 0.1;
    int n_tilde = 8;
    std::string out = "out";
    int threads = 0;
    // solve / simulate extras
    std::string wz_case = "all";
    int substeps = 4;
    int count = 1;
};

std::pair<int, int> parse_range(const std::string& s) {
    const auto pos = s.find("..");
    if (pos == std::string::npos) {
        const int v = std::stoi(s);
        return {v, v};
    }
    return {std::stoi(s.substr(0, pos)), std::stoi(s.substr(pos + 2))};
}

RhoParams rho_params(const Options& o) {
    RhoParams par;
    par.p = o.p;
    par.gamma = o.gamma;
    par.n_max = o.n_max;
    if (o.tail == "analytic" || o.tail == "analytic_tail")
        par.tail = TailMode::analytic_tail;
    else if (o.tail == "truncate")
        par.tail = TailMode::truncate;
    else
        throw std::invalid_argument("--tail must be analytic or truncate");
    par.validate();
    return par;
}

RateCheckSpec rate_spec(const Options& o) {
    RateCheckSpec spec;
    spec.q = o.q;
    spec.n_tilde = o.n_tilde;
    spec.beta = o.beta;
    spec.theta = o.theta;
    spec.delta = o.delta;
    spec.eps = o.eps;
    std::tie(spec.m_lo, spec.m_hi) = parse_range(o.m_range);
    std::tie(spec.n_lo, spec.n_hi) = parse_range(o.n_range);
    spec.samples = o.samples;
    spec.seed = o.seed;
    spec.threads = o.threads;
    return spec;
}

void write_manifest(const Options& o, const std::string& command) {
    std::ofstream mf(fs::path(o.out) / "manifest.txt");
    mf << "build = " << build_identifier() << "\n";
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    mf << "timestamp = " << now << "\n";
    mf << "command = " << command << "\n";
    mf << "dim = " << o.dim << "\nresolution = " << o.resolution << "\nseed = " << o.seed
       << "\np = " << o.p << "\ngamma = " << o.gamma << "\nn_max = " << o.n_max
       << "\ntail = " << o.tail << "\nm = " << o.m_range << "\nn = " << o.n_range
       << "\nsamples = " << o.samples << "\nq = " << o.q << "\nbeta = " << o.beta
       << "\ntheta = " << o.theta << "\ndelta = " << o.delta << "\neps = " << o.eps
       << "\nn_tilde = " << o.n_tilde << "\nthreads = " << o.threads
       << "\nsubsteps = " << o.substeps << "\ncase = " << o.wz_case << "\n";
    mf << "lemmas =";
    for (const auto& l : o.lemmas) mf << ' ' << l;
    mf << "\n";
}

int run_simulate(const Options& o) {
    fs::create_directories(o.out);
    for (int i = 0; i < o.count; ++i) {
        const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(i);
        const auto path = DyadicBrownianPath::generate(o.dim, o.resolution, seed);
        const fs::path file = fs::path(o.out) / ("path_" + std::to_string(seed) + ".csv");
        std::ofstream os(file);
        path.dump_csv(os);
        std::cout << "wrote " << file.string() << "\n";
    }
    write_manifest(o, "simulate");
    return 0;
}

int run_verify(const Options& o) {
    std::vector<std::string> lemmas = o.lemmas;
    if (lemmas.size() == 1 && lemmas[0] == "all") lemmas = known_lemmas();
    if (lemmas.empty()) {
        std::cerr << "verify: no lemma given; use --lemma <id> (known:";
        for (const auto& l : known_lemmas()) std::cerr << ' ' << l;
        std::cerr << " | all)\n";
        return 2;
    }
    for (const auto& l : lemmas) lemma_anchor(l);  // validates the ids up front

    fs::create_directories(o.out);
    const VerifyContext ctx{o.dim, rho_params(o)};
    const RateCheckSpec spec = rate_spec(o);
    std::vector<LemmaReport> reports;
    bool all_pass = true;
    for (const auto& lemma : lemmas) {
        std::cout << "verify " << lemma << " [" << lemma_anchor(lemma) << "] samples="
                  << spec.samples << " ..." << std::flush;
        const auto t0 = std::chrono::steady_clock::now();
        const LemmaReport rep = verify_lemma(lemma, spec, ctx);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << " " << verdict_name(rep.verdict) << " (" << std::fixed << secs << "s)\n";
        std::cout.unsetf(std::ios::fixed);
        for (const auto& c : rep.checks)
            std::cout << "    " << c.name << ": " << verdict_name(c.verdict) << "  " << c.detail
                      << "\n";
        if (rep.verdict != Verdict::pass) all_pass = false;

        std::string base = lemma;
        for (auto& ch : base)
            if (ch == '.') ch = '_';
        {
            std::ofstream os(fs::path(o.out) / (base + ".csv"));
            write_rows_csv(os, rep.rows);
        }
        {
            std::ofstream os(fs::path(o.out) / (base + ".svg"));
            write_lemma_svg(os, rep);
        }
        reports.push_back(rep);
    }
    {
        std::ofstream os(fs::path(o.out) / "verdicts.csv");
        write_verdicts_csv(os, reports);
    }
    write_manifest(o, "verify");
    return all_pass ? 0 : 1;
}

int run_solve(const Options& o) {
    fs::create_directories(o.out);
    std::vector<WzCase> cases;
    if (o.wz_case == "all")
        cases = {WzCase::exp_scalar, WzCase::commuting_linear, WzCase::rotation_area};
    else
        cases = {wz_case_from_string(o.wz_case)};

    auto [m_lo, m_hi] = parse_range(o.m_range);
    m_hi = std::min(m_hi, o.resolution - 1);
    for (const WzCase c : cases) {
        const int d = c == WzCase::exp_scalar ? 1 : 2;
        const auto path = DyadicBrownianPath::generate(d, o.resolution, o.seed);
        auto [spec, y0] = wz_case_spec(c);
        const auto steps = wz_sequence(spec, y0, path, m_lo, m_hi, o.substeps, o.p);
        const auto ref = stratonovich_reference(c, path);

        const std::string name = wz_case_name(c);
        std::ofstream gaps(fs::path(o.out) / ("solve_" + name + "_gaps.csv"));
        gaps << "m,d_p_gap,sup_gap\n";
        char buf[64];
        for (const auto& s : steps) {
            std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g", s.m, s.d_p_gap, s.sup_gap);
            gaps << buf << "\n";
        }
        std::ofstream traj(fs::path(o.out) / ("solve_" + name + "_trajectory.csv"));
        steps.back().result.dump_csv(traj);

        // Endpoint gap against the exact solution of the finest driver.
        const auto& fin = steps.back().result;
        const std::size_t last = (1ULL << fin.level);
        const std::size_t rlast = path.grid_points() - 1;
        double gap = 0.0;
        for (int i = 0; i < fin.dim; ++i)
            gap = std::max(gap, std::abs(fin.y[last * fin.dim + i] -
                                         ref[rlast * fin.dim + i]));
        std::cout << "solve " << name << ": m=" << m_lo << ".." << m_hi
                  << "  endpoint gap vs reference " << gap << "  last d_p gap "
                  << steps.back().d_p_gap << "\n";
    }
    write_manifest(o, "solve");
    return 0;
}

int run_integrate(const Options& o) {
    fs::create_directories(o.out);
    std::ofstream csv(fs::path(o.out) / "integrate.csv");
    csv << "case,value,reference,gap\n";
    char buf[160];

    // Identity 1-form along a Brownian polygon recovers the polygon's lift.
    const auto path = DyadicBrownianPath::generate(2, 8, o.seed);
    const PolygonalDriver drv(polygonal(path, 8));
    const GroupTensor2 rec = integrate(identity_one_form(2), drv, 0.0, 1.0);
    const GroupTensor2 lift = lift_polygonal(polygonal(path, 8), 0.0, 1.0);
    const double id_gap = rel_gap(rec, lift);
    std::snprintf(buf, sizeof buf, "identity_recovers_lift,%.12g,%.12g,%.6g",
                  level_norms(rec).second, level_norms(lift).second, id_gap);
    csv << buf << "\n";
    std::cout << "integrate identity: lift recovery gap " << id_gap << "\n";

    // Affine 1-form against the segment-exact first-level reference.
    const std::vector<double> a0 = {0.3, -0.1, 0.2, 0.7};
    const std::vector<double> b = {0.5, -0.2, 0.1, 0.4, -0.3, 0.25, 0.6, -0.15};
    const OneForm lf = linear_one_form(2, 2, a0, b);
    const GroupTensor2 got = integrate(lf, drv, 0.0, 1.0);
    double ref[2] = {0.0, 0.0};
    for (std::uint64_t k = 1; k <= (1ULL << 8); ++k) {
        const Vec wa = path.value((k - 1) << (path.resolution() - 8));
        const Vec delta = path.xi(8, k);
        for (int out = 0; out < 2; ++out) {
            double v = 0.0;
            for (int i = 0; i < 2; ++i) {
                v += (a0[out * 2 + i] + b[(out * 2 + i) * 2 + 0] * wa[0] +
                      b[(out * 2 + i) * 2 + 1] * wa[1]) *
                     delta[i];
                for (int j = 0; j < 2; ++j)
                    v += 0.5 * b[(out * 2 + i) * 2 + j] * delta[j] * delta[i];
            }
            ref[out] += v;
        }
    }
    double lin_gap = 0.0;
    for (int out = 0; out < 2; ++out)
        lin_gap = std::max(lin_gap, std::abs(got.level1[out] - ref[out]));
    std::snprintf(buf, sizeof buf, "linear_vs_riemann_stieltjes,%.12g,%.12g,%.6g",
                  got.level1[0], ref[0], lin_gap);
    csv << buf << "\n";
    std::cout << "integrate linear: first-level gap vs segment sum " << lin_gap << "\n";

    // Smooth sanity case: x dx over the identity ramp.
    const int rm = 10;
    std::vector<double> ramp((1ULL << rm) + 1);
    for (std::size_t k = 0; k < ramp.size(); ++k)
        ramp[k] = std::ldexp(static_cast<double>(k), -rm);
    const auto ramp_path = DyadicBrownianPath::from_values(1, rm, ramp);
    OneForm xdx;
    xdx.dim_in = xdx.dim_out = 1;
    xdx.eval = [](const double* x, double* f) { f[0] = x[0]; };
    xdx.deriv = [](const double*, double* df) { df[0] = 1.0; };
    const GroupTensor2 half = integrate(xdx, PolygonalDriver(polygonal(ramp_path, rm)), 0.0, 1.0);
    std::snprintf(buf, sizeof buf, "x_dx_over_ramp,%.12g,0.5,%.6g", half.level1[0],
                  std::abs(half.level1[0] - 0.5));
    csv << buf << "\n";
    std::cout << "integrate x dx: value " << half.level1[0] << " (reference 0.5)\n";

    write_manifest(o, "integrate");
    return 0;
}

int run_report(const Options& o) {
    const fs::path file = fs::path(o.out) / "verdicts.csv";
    std::ifstream is(file);
    if (!is) {
        std::cerr << "report: " << file.string() << " not found; run verify first\n";
        return 2;
    }
    const auto verdicts = read_verdicts_csv(is);
    int pass = 0, other = 0;
    for (const auto& [lemma, verdict] : verdicts) {
        std::cout << lemma << ": " << verdict << "\n";
        if (verdict == "pass")
            ++pass;
        else
            ++other;
    }
    std::cout << pass << " pass, " << other << " fail/inconclusive\n";
    return other == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"roughdyadic: dyadic rough-path numerics and Monte Carlo verification"};
    app.set_config("--config", "", "key = value file mirroring the flags (flags override)");
    app.add_option("--dim", o.dim, "driver dimension d");
    app.add_option("--resolution", o.resolution, "dyadic resolution M of simulated paths");
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--p", o.p, "p-variation exponent, in (2,3)");
    app.add_option("--gamma", o.gamma, "rho weight exponent, > p/2 - 1");
    app.add_option("--n-max", o.n_max, "dyadic cutoff of the rho sums");
    app.add_option("--tail", o.tail, "rho tail policy: analytic | truncate");
    app.add_option("--m", o.m_range, "level sweep, e.g. 2..10");
    app.add_option("--n", o.n_range, "inner level sweep, e.g. 1..10");
    app.add_option("--samples", o.samples, "Monte Carlo sample count");
    app.add_option("--q", o.q, "moment order");
    app.add_option("--beta", o.beta, "rate exponent beta");
    app.add_option("--theta", o.theta, "union-bound split exponent theta");
    app.add_option("--delta", o.delta, "growth exponent delta");
    app.add_option("--eps", o.eps, "required decay rate where a lemma leaves it free");
    app.add_option("--n-tilde", o.n_tilde, "power n_tilde of the polynomial functionals");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--threads", o.threads,
                   "worker threads (0 = ROUGHDYADIC_THREADS or hardware)");

    auto* sim = app.add_subcommand("simulate", "generate and dump sample paths as CSV");
    sim->add_option("--count", o.count, "number of paths (consecutive seeds)");
    auto* ver = app.add_subcommand("verify", "run Monte Carlo lemma verification sweeps");
    ver->add_option("--lemma", o.lemmas, "lemma ids, or 'all'")->delimiter(',');
    auto* sol = app.add_subcommand("solve", "Wong-Zakai benchmark systems across levels");
    sol->add_option("--case", o.wz_case,
                    "exp_scalar | commuting_linear | rotation_area | all");
    sol->add_option("--substeps", o.substeps, "RK4 steps per dyadic segment");
    auto* integ = app.add_subcommand("integrate", "rough integration demos");
    auto* rep = app.add_subcommand("report", "aggregate verdicts from --out");
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) return run_simulate(o);
        if (ver->parsed()) return run_verify(o);
        if (sol->parsed()) return run_solve(o);
        if (integ->parsed()) return run_integrate(o);
        if (rep->parsed()) return run_report(o);
        std::cerr << app.help();
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
