#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "magvel/arithmetic.hpp"
#include "magvel/errors.hpp"
#include "magvel/field_file.hpp"
#include "magvel/fields.hpp"
#include "magvel/forward.hpp"
#include "magvel/inverse.hpp"
#include "magvel/lattice.hpp"
#include "magvel/transport.hpp"

namespace magvel {
namespace cli {

/// Exit codes, one per failure class, so shell harnesses never parse output:
/// 0 success, 2 configuration or precondition, 3 I/O, 4 resonant obstruction,
/// 5 expectation mismatch, 6 acceptance failure.
namespace exit_code {
constexpr int ok = 0;
constexpr int config = 2;
constexpr int io = 3;
constexpr int resonant = 4;
constexpr int expectation = 5;
constexpr int acceptance = 6;
} // namespace exit_code

namespace detail {

/// Shortest round-trippable decimal; the only number format any command
/// emits, so identical runs produce identical bytes.
inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

inline double parse_double(const std::string& tok, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument(what + ": cannot parse number '" + tok + "'");
    }
    if (used != tok.size())
        throw std::invalid_argument(what + ": cannot parse number '" + tok + "'");
    return v;
}

inline std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) out.push_back(parse_double(tok, what));
    return out;
}

inline std::vector<int> parse_ints(const std::string& s, const std::string& what) {
    std::vector<int> out;
    for (const auto& tok : split(s, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument(what + ": cannot parse integer '" + tok + "'");
        }
        if (used != tok.size())
            throw std::invalid_argument(what + ": cannot parse integer '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

/// Background-field argument. Components written without '.', 'e' or 'E'
/// (integers and p/q fractions) select the exact-rational resonance path;
/// any decimal component selects the float path.
struct FieldArg {
    std::string raw;
    std::vector<double> components;
    std::optional<std::vector<Rational>> rationals;
};

inline FieldArg parse_field_arg(const std::string& raw) {
    FieldArg f;
    f.raw = raw;
    const auto toks = split(raw, ',');
    const bool exact = std::all_of(toks.begin(), toks.end(), [](const std::string& t) {
        return t.find_first_of(".eE") == std::string::npos;
    });
    if (exact) {
        std::vector<Rational> rats;
        for (const auto& t : toks) rats.push_back(Rational::parse(t));
        f.rationals = std::move(rats);
        for (const auto& r : *f.rationals) f.components.push_back(r.to_double());
    } else {
        f.components = parse_doubles(raw, "--F");
    }
    return f;
}

template <int D>
std::string mode_str(const Mode<D>& k) {
    std::string s = "(";
    for (int i = 0; i < D; ++i) {
        if (i) s += ",";
        s += std::to_string(k[i]);
    }
    return s + ")";
}

inline std::string join_nums(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += num(v[i]);
    }
    return s;
}

inline std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

inline std::string dir_of(const std::string& path) {
    const auto pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

inline std::string resolve_out_dir(const std::string& flag) {
    std::string dir = flag;
    if (dir.empty()) {
        if (const char* env = std::getenv("MAGVEL_OUT_DIR")) dir = env;
        if (dir.empty()) dir = ".";
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir + ": cannot create output directory");
    return dir;
}

inline void write_text(const std::string& path, const std::string& text) {
    magvel::detail::atomic_write_file(path, text);
}

template <int D>
TorusLattice<D> make_lattice(const std::vector<int>& N, const std::vector<double>& L) {
    std::array<int, D> counts{};
    Vec<D> periods{};
    for (int i = 0; i < D; ++i) {
        counts[i] = N[static_cast<std::size_t>(i)];
        periods[i] = L[static_cast<std::size_t>(i)];
    }
    return TorusLattice<D>(periods, counts);
}

template <int D>
Vec<D> to_vec(const std::vector<double>& v) {
    Vec<D> out{};
    for (int i = 0; i < D; ++i) out[i] = v[static_cast<std::size_t>(i)];
    return out;
}

inline double default_float_tolerance(const std::vector<double>& F,
                                      const std::vector<double>& L) {
    double fn = 0.0;
    for (double c : F) fn += c * c;
    double lmin = L[0];
    for (double c : L) lmin = std::min(lmin, c);
    return 1e-12 * std::sqrt(fn) / lmin;
}

/// Resonance scan honoring the exact-vs-float entry convention.
template <int D>
ResonanceReport<D> scan_resonances(const FieldArg& F, const std::vector<double>& L, int kmax,
                                   std::optional<double> tol) {
    if (F.rationals) {
        std::array<Rational, D> r{};
        for (int i = 0; i < D; ++i) r[i] = (*F.rationals)[static_cast<std::size_t>(i)];
        return resonant_set<D>(r, kmax);
    }
    const double tolerance = tol ? *tol : default_float_tolerance(F.components, L);
    return resonant_set<D>(BackgroundField<D>(to_vec<D>(F.components)), to_vec<D>(L), kmax,
                           tolerance);
}

} // namespace detail

// ---------------------------------------------------------------------------
// forward

struct ForwardOptions {
    std::string F, L, N, times, velocity_file, out_dir;
    double eta = 1.0;
    double amplitude = 1.0;
    std::int64_t seed = -1;
    int band = 0;
};

template <int D>
int run_forward(const ForwardOptions& opt, std::ostream& out) {
    using namespace detail;
    const auto N = parse_ints(opt.N, "--N");
    auto L = opt.L.empty() ? std::vector<double>(N.size(), 1.0) : parse_doubles(opt.L, "--L");
    if (L.size() != N.size())
        throw std::invalid_argument("--L and --N must have the same number of entries");
    const auto lattice = make_lattice<D>(N, L);
    const auto F_arg = parse_field_arg(opt.F);
    if (F_arg.components.size() != static_cast<std::size_t>(D))
        throw std::invalid_argument("--F must have one component per dimension");
    const BackgroundField<D> F(to_vec<D>(F_arg.components));
    const auto times = parse_doubles(opt.times, "--times");

    SpectralVectorField<D> v(lattice);
    if (!opt.velocity_file.empty()) {
        if (opt.seed >= 0)
            throw std::invalid_argument("--seed and --velocity-file are mutually exclusive");
        const auto grid = read_torus_field<D>(opt.velocity_file);
        if (!(grid.lattice() == lattice))
            throw std::invalid_argument(
                opt.velocity_file + ": velocity file lattice does not match --N/--L");
        v = to_spectral(grid);
    } else if (opt.seed >= 0) {
        if (opt.band < 1) throw std::invalid_argument("--band must be >= 1 with --seed");
        v = random_solenoidal(lattice, static_cast<std::uint64_t>(opt.seed), opt.band,
                              opt.amplitude);
    } else {
        throw std::invalid_argument("provide either --seed/--band or --velocity-file");
    }

    // The solver anchors the initial state at the first sample time, and the
    // command's contract is zero Cauchy data at t = 0, so evolve through a
    // prepended origin sample when the user window starts later.
    const SpectralVectorField<D> b0(lattice);
    const bool prepend = times.empty() || times.front() > 0.0;
    std::vector<double> solve_times = times;
    if (prepend) solve_times.insert(solve_times.begin(), 0.0);
    auto series = evolve_series(lattice, opt.eta, F, v, b0, solve_times);
    if (prepend) {
        series.times.erase(series.times.begin());
        series.snapshots.erase(series.snapshots.begin());
    }

    const std::string dir = resolve_out_dir(opt.out_dir);
    write_torus_field(dir + "/velocity.vfld", to_grid(v));

    std::string manifest;
    manifest += "magvel-forward-manifest v1\n";
    manifest += "dim " + std::to_string(D) + "\n";
    manifest += "N " + join_ints(N) + "\n";
    manifest += "L " + join_nums(L) + "\n";
    manifest += "F " + opt.F + "\n";
    manifest += "eta " + num(opt.eta) + "\n";
    manifest += "velocity velocity.vfld\n";
    for (std::size_t j = 0; j < series.times.size(); ++j) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%03zu.vfld", j);
        write_torus_field(dir + "/" + name, to_grid(series.snapshots[j]));
        manifest += "snapshot " + num(series.times[j]) + " " + name + " " +
                    num(relative_divergence(series.snapshots[j])) + "\n";
    }
    write_text(dir + "/manifest.txt", manifest);
    out << "wrote " << series.times.size() << " snapshot(s) and manifest to " << dir << "\n";
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// invert

struct InvertOptions {
    std::string manifest, snapshot, F, policy = "strict", out_dir;
    double snapshot_time = 0.0;
    std::optional<double> eta, tau, tol;
    std::optional<int> kmax;
};

namespace detail {

template <int D>
struct LoadedSeries {
    TorusLattice<D> lattice;
    EvolutionSeries<D> series;
    std::string F_raw;
    double eta = 0.0;
};

template <int D>
LoadedSeries<D> load_manifest_series(const std::string& path) {
    const std::string text = magvel::detail::read_file_bytes(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "magvel-forward-manifest v1")
        throw IoError(path + ": not a forward manifest");
    std::vector<int> N;
    std::vector<double> L;
    std::string F_raw;
    std::optional<double> eta;
    std::vector<double> times;
    std::vector<std::string> files;
    int dim = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string key;
        row >> key;
        if (key == "dim") {
            row >> dim;
        } else if (key == "N") {
            std::string s;
            row >> s;
            N = parse_ints(s, path + ": N");
        } else if (key == "L") {
            std::string s;
            row >> s;
            L = parse_doubles(s, path + ": L");
        } else if (key == "F") {
            row >> F_raw;
        } else if (key == "eta") {
            std::string s;
            row >> s;
            eta = parse_double(s, path + ": eta");
        } else if (key == "snapshot") {
            std::string t, name, divergence;
            row >> t >> name >> divergence;
            if (name.empty()) throw IoError(path + ": malformed snapshot row");
            times.push_back(parse_double(t, path + ": snapshot time"));
            files.push_back(name);
        }
    }
    if (dim != D) throw IoError(path + ": manifest dimension does not match");
    if (N.size() != static_cast<std::size_t>(D) || L.size() != static_cast<std::size_t>(D) ||
        !eta || files.empty())
        throw IoError(path + ": manifest is missing required rows");

    LoadedSeries<D> loaded{make_lattice<D>(N, L), {}, F_raw, *eta};
    loaded.series.eta = *eta;
    loaded.series.times = times;
    const std::string base = dir_of(path);
    for (const auto& name : files) {
        auto grid = read_torus_field<D>(base + "/" + name);
        if (!(grid.lattice() == loaded.lattice))
            throw IoError(base + "/" + name + ": snapshot lattice does not match manifest");
        loaded.series.snapshots.push_back(to_spectral(grid));
    }
    return loaded;
}

} // namespace detail

template <int D>
int run_invert(const InvertOptions& opt, std::ostream& out, std::ostream& err) {
    using namespace detail;
    if (opt.policy != "strict" && opt.policy != "zero-fill")
        throw std::invalid_argument("--policy must be 'strict' or 'zero-fill'");

    // Source extraction: finite-difference series path from a manifest, or
    // the closed-form factor inversion from one snapshot.
    std::optional<TorusLattice<D>> lattice;
    std::string F_raw = opt.F;
    SpectralVectorField<D> h = [&] {
        if (!opt.manifest.empty()) {
            auto loaded = load_manifest_series<D>(opt.manifest);
            lattice = loaded.lattice;
            if (F_raw.empty()) F_raw = loaded.F_raw;
            loaded.series.eta = opt.eta ? *opt.eta : loaded.eta;
            auto sources = source_from_series(loaded.series);
            return sources[(sources.size() - 1) / 2];
        }
        if (opt.snapshot.empty())
            throw std::invalid_argument("provide --manifest or --snapshot");
        if (!(opt.snapshot_time > 0.0))
            throw std::invalid_argument("--snapshot-time must be positive with --snapshot");
        if (!opt.eta)
            throw std::invalid_argument("--eta is required with --snapshot");
        auto grid = read_torus_field<D>(opt.snapshot);
        lattice = grid.lattice();
        return source_from_snapshot(to_spectral(grid), opt.snapshot_time, *opt.eta);
    }();

    if (F_raw.empty()) throw std::invalid_argument("--F is required (or take it from a manifest)");
    const auto F_arg = parse_field_arg(F_raw);
    if (F_arg.components.size() != static_cast<std::size_t>(D))
        throw std::invalid_argument("--F must have one component per dimension");
    const BackgroundField<D> F(to_vec<D>(F_arg.components));

    std::vector<double> L(lattice->periods().begin(), lattice->periods().end());
    int kmax = opt.kmax ? *opt.kmax : lattice->half_width(0);
    if (!opt.kmax)
        for (int i = 1; i < D; ++i) kmax = std::max(kmax, lattice->half_width(i));
    const auto report = scan_resonances<D>(F_arg, L, kmax, opt.tol);

    std::optional<double> C;
    if (opt.tau) {
        const auto est = diophantine_estimate<D>(F, lattice->periods(), *opt.tau, kmax);
        if (est.C_est > 0.0) C = est.C_est;
    }

    const std::string dir = resolve_out_dir(opt.out_dir);
    const auto policy =
        opt.policy == "strict" ? ResonantPolicy::Strict : ResonantPolicy::ZeroFill;

    ReconstructionResult<D> rec{SpectralVectorField<D>(*lattice), {}, 0.0, 0.0, std::nullopt};
    try {
        rec = reconstruct_velocity(h, F, report, policy, opt.tau, C);
    } catch (const UnsolvableModeError& e) {
        std::string text;
        text += "magvel-invert-report v1\n";
        text += "status resonant-obstruction\n";
        text += "policy strict\n";
        text += "message the background field is commensurable on the data band, so the\n";
        text += "message incommensurability hypothesis fails and these source modes are\n";
        text += "message unreachable by any velocity:\n";
        for (const auto& m : e.modes()) {
            std::string row = "offending_mode (";
            for (int i = 0; i < e.dim(); ++i) {
                if (i) row += ",";
                row += std::to_string(m[static_cast<std::size_t>(i)]);
            }
            text += row + ")\n";
        }
        write_text(dir + "/report.txt", text);
        err << "error: " << e.what() << "\n";
        err << "(incommensurability hypothesis violated; offending modes listed in " << dir
            << "/report.txt)\n";
        return exit_code::resonant;
    }

    write_torus_field(dir + "/velocity.vfld", to_grid(rec.v));

    std::string text;
    text += "magvel-invert-report v1\n";
    text += "status ok\n";
    text += "policy " + opt.policy + "\n";
    text += "source_path " + std::string(opt.manifest.empty() ? "snapshot" : "series") + "\n";
    text += "resonance_mode " + report.mode + "\n";
    if (report.mode == "float-threshold")
        text += "resonance_tolerance " + num(report.tolerance) + "\n";
    text += "kmax " + std::to_string(report.kmax) + "\n";
    text += "resonant_count " + std::to_string(report.resonant_modes.size()) + "\n";
    for (const auto& k : report.resonant_modes) text += "resonant " + mode_str<D>(k) + "\n";
    text += "zeroed_count " + std::to_string(rec.zeroed_modes.size()) + "\n";
    text += "dropped_energy " + num(rec.dropped_energy) + "\n";
    text += "residual " + num(rec.residual) + "\n";
    if (opt.tau) {
        text += "stability_tau " + num(*opt.tau) + "\n";
        if (C) {
            text += "stability_C " + num(*C) + "\n";
            text += "stability_rhs " + num(*rec.stability_rhs) + "\n";
            text += "velocity_l2_spectral " + num(sobolev_seminorm(rec.v, 0.0)) + "\n";
        } else {
            text += "stability_C none (commensurable scan window)\n";
        }
    }
    text += "velocity_file velocity.vfld\n";
    write_text(dir + "/report.txt", text);
    out << "reconstructed velocity written to " << dir << "/velocity.vfld (residual "
        << num(rec.residual) << ")\n";
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// resonance / diophantine

struct ResonanceOptions {
    std::string F, L, out_dir;
    int kmax = 8;
    std::optional<double> tol;
    bool expect_incommensurable = false;
};

namespace detail {

/// Shell minima of |F.g(k)| over the scan box, one CSV row per |k| shell.
template <int D>
std::string pairing_csv(const std::vector<double>& F, const std::vector<double>& L, int kmax) {
    std::map<std::int64_t, double> shell_min;
    magvel::detail::scan_box<D>(kmax, [&](const Mode<D>& k) {
        double pairing = 0.0;
        for (int i = 0; i < D; ++i)
            pairing += F[static_cast<std::size_t>(i)] * double(k[i]) /
                       L[static_cast<std::size_t>(i)];
        const auto nsq = magvel::detail::mode_norm_sq<D>(k);
        const double mag = std::abs(pairing);
        auto [it, fresh] = shell_min.try_emplace(nsq, mag);
        if (!fresh) it->second = std::min(it->second, mag);
    });
    std::string csv = "k_norm,min_abs_pairing\n";
    for (const auto& [nsq, mag] : shell_min)
        csv += num(std::sqrt(double(nsq))) + "," + num(mag) + "\n";
    return csv;
}

} // namespace detail

template <int D>
int run_resonance(const ResonanceOptions& opt, std::ostream& out, std::ostream& err) {
    using namespace detail;
    const auto F_arg = parse_field_arg(opt.F);
    if (F_arg.components.size() != static_cast<std::size_t>(D))
        throw std::invalid_argument("--F must have one component per dimension");
    const auto L = opt.L.empty() ? std::vector<double>(D, 1.0) : parse_doubles(opt.L, "--L");
    if (L.size() != static_cast<std::size_t>(D))
        throw std::invalid_argument("--L must have one entry per dimension");

    const auto report = scan_resonances<D>(F_arg, L, opt.kmax, opt.tol);

    std::string text;
    text += "magvel-resonance-report v1\n";
    text += "F " + opt.F + "\n";
    text += "L " + join_nums(L) + "\n";
    text += "kmax " + std::to_string(opt.kmax) + "\n";
    text += "mode " + report.mode + "\n";
    if (report.mode == "float-threshold")
        text += "tolerance " + num(report.tolerance) + "\n";
    text += "resonant_count " + std::to_string(report.resonant_modes.size()) + "\n";
    for (const auto& k : report.resonant_modes) text += "resonant " + mode_str<D>(k) + "\n";
    text += "min_abs_pairing " + num(report.min_abs_pairing) + "\n";
    text += "argmin " + mode_str<D>(report.argmin) + "\n";
    if (F_arg.rationals) {
        const auto inc = is_incommensurable(
            std::vector<Rational>(F_arg.rationals->begin(), F_arg.rationals->end()));
        text += std::string("incommensurable ") + (inc.incommensurable ? "true" : "false") + "\n";
        if (!inc.incommensurable) {
            std::string w = "witness (";
            for (std::size_t i = 0; i < inc.witness.size(); ++i) {
                if (i) w += ",";
                w += std::to_string(inc.witness[i]);
            }
            text += w + ")\n";
        }
    }

    const std::string dir = resolve_out_dir(opt.out_dir);
    write_text(dir + "/resonance.txt", text);
    write_text(dir + "/pairing.csv", pairing_csv<D>(F_arg.components, L, opt.kmax));
    out << text;

    if (opt.expect_incommensurable && !report.resonant_modes.empty()) {
        err << "error: expected an incommensurable background field, but the scan found "
            << report.resonant_modes.size() << " resonant mode(s) up to kmax "
            << std::to_string(opt.kmax) << "\n";
        return exit_code::expectation;
    }
    return exit_code::ok;
}

struct DiophantineOptions {
    std::string F, L, out_dir;
    double tau = 0.0;
    int kmax = 8;
    bool expect_incommensurable = false;
};

template <int D>
int run_diophantine(const DiophantineOptions& opt, std::ostream& out, std::ostream& err) {
    using namespace detail;
    const auto F_arg = parse_field_arg(opt.F);
    if (F_arg.components.size() != static_cast<std::size_t>(D))
        throw std::invalid_argument("--F must have one component per dimension");
    const auto L = opt.L.empty() ? std::vector<double>(D, 1.0) : parse_doubles(opt.L, "--L");
    if (L.size() != static_cast<std::size_t>(D))
        throw std::invalid_argument("--L must have one entry per dimension");

    const BackgroundField<D> F(to_vec<D>(F_arg.components));
    const auto est = diophantine_estimate<D>(F, to_vec<D>(L), opt.tau, opt.kmax);

    std::string text;
    text += "magvel-diophantine-report v1\n";
    text += "F " + opt.F + "\n";
    text += "L " + join_nums(L) + "\n";
    text += "tau " + num(est.tau) + "\n";
    text += "kmax " + std::to_string(est.kmax) + "\n";
    text += "C_est " + num(est.C_est) + "\n";
    text += "argmin " + mode_str<D>(est.argmin_k) + "\n";

    std::string csv = "k_norm,pairing\n";
    for (const auto& row : est.envelope)
        csv += num(row.k_norm) + "," + num(row.pairing) + "\n";

    const std::string dir = resolve_out_dir(opt.out_dir);
    write_text(dir + "/diophantine.txt", text);
    write_text(dir + "/envelope.csv", csv);
    out << text;

    if (opt.expect_incommensurable && est.C_est == 0.0) {
        err << "error: expected an incommensurable background field, but the scan window "
               "contains an exact resonance (C_est = 0)\n";
        return exit_code::expectation;
    }
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// roundtrip

struct RoundtripOptions {
    std::string F, L, N, policy = "strict", out_dir;
    double eta = 1.0;
    double snapshot_time = 0.5;
    double dt = 1e-3;
    std::optional<double> window_center, tau;
    std::int64_t seed = 1;
    int band = 8;
    std::optional<int> kmax;
    std::optional<double> tol;
};

template <int D>
int run_roundtrip(const RoundtripOptions& opt, std::ostream& out, std::ostream& err) {
    using namespace detail;
    const auto N = parse_ints(opt.N, "--N");
    auto L = opt.L.empty() ? std::vector<double>(N.size(), 1.0) : parse_doubles(opt.L, "--L");
    if (L.size() != N.size())
        throw std::invalid_argument("--L and --N must have the same number of entries");
    const auto lattice = make_lattice<D>(N, L);
    const auto F_arg = parse_field_arg(opt.F);
    if (F_arg.components.size() != static_cast<std::size_t>(D))
        throw std::invalid_argument("--F must have one component per dimension");
    const BackgroundField<D> F(to_vec<D>(F_arg.components));
    if (opt.band < 1) throw std::invalid_argument("--band must be >= 1");
    const double tau = opt.tau ? *opt.tau : (D == 2 ? 1.0 : 2.0);
    const double T = opt.snapshot_time;
    if (!(T > 0.0)) throw std::invalid_argument("--snapshot-time must be positive");
    const double tc = opt.window_center ? *opt.window_center : T;
    if (!(tc - 5.0 * opt.dt > 0.0))
        throw std::invalid_argument("--window-center must exceed five --dt steps");
    const auto policy =
        opt.policy == "strict" ? ResonantPolicy::Strict
        : opt.policy == "zero-fill"
            ? ResonantPolicy::ZeroFill
            : throw std::invalid_argument("--policy must be 'strict' or 'zero-fill'");

    const auto v_true = random_solenoidal(lattice, static_cast<std::uint64_t>(opt.seed),
                                          opt.band, 1.0);
    const auto h_true = curl_cross(F, v_true);
    const double v_norm = l2_norm(v_true);

    const int kmax = opt.kmax ? *opt.kmax : opt.band;
    std::vector<double> L_vec(lattice.periods().begin(), lattice.periods().end());
    const auto report = scan_resonances<D>(F_arg, L_vec, kmax, opt.tol);
    const auto est = diophantine_estimate<D>(F, lattice.periods(), tau, kmax);
    std::optional<double> C;
    if (est.C_est > 0.0) C = est.C_est;

    const std::string dir = resolve_out_dir(opt.out_dir);
    write_torus_field(dir + "/v_true.vfld", to_grid(v_true));

    auto reconstruct = [&](const SpectralVectorField<D>& h) {
        try {
            return reconstruct_velocity(h, F, report, policy, tau, C);
        } catch (const UnsolvableModeError& e) {
            err << "error: " << e.what() << "\n";
            err << "(the background field is commensurable over the scan window; the "
                   "incommensurability hypothesis fails)\n";
            throw;
        }
    };

    int code = exit_code::ok;
    std::string failing;
    std::string csv = "check,value,bound,pass\n";
    auto add_row = [&](const std::string& name, double value, std::optional<double> bound,
                       bool pass) {
        csv += name + "," + num(value) + "," + (bound ? num(*bound) : std::string("none")) +
               "," + (pass ? "1" : "0") + "\n";
        if (!pass && code == exit_code::ok) {
            code = exit_code::acceptance;
            failing = name;
        }
    };

    try {
        // Snapshot path: closed-form factor forward and back.
        const auto b_T = duhamel_snapshot(lattice, opt.eta, h_true, T);
        const auto h_snap = source_from_snapshot(b_T, T, opt.eta);
        const auto rec_snap = reconstruct(h_snap);
        const double err_snap = l2_norm(rec_snap.v - v_true) / v_norm;
        add_row("snapshot_path_error", err_snap, 1e-8, err_snap <= 1e-8);
        write_torus_field(dir + "/v_snapshot.vfld", to_grid(rec_snap.v));

        // Series path: evolve through a window centred on tc and take the
        // central-difference source at the centre snapshot.
        std::vector<double> times{0.0};
        for (int j = 0; j <= 10; ++j) times.push_back(tc + (j - 5) * opt.dt);
        const SpectralVectorField<D> b0(lattice);
        const auto full = evolve_series(lattice, opt.eta, F, v_true, b0, times);
        EvolutionSeries<D> window;
        window.eta = opt.eta;
        window.times.assign(full.times.begin() + 1, full.times.end());
        window.snapshots.assign(full.snapshots.begin() + 1, full.snapshots.end());
        const auto h_series = source_from_series(window)[5];
        const auto rec_series = reconstruct(h_series);
        const double err_series = l2_norm(rec_series.v - v_true) / v_norm;
        add_row("series_path_error", err_series, std::nullopt, true);
        write_torus_field(dir + "/v_series.vfld", to_grid(rec_series.v));

        const double forward_div = divergence_residual(full);
        add_row("forward_divergence", forward_div, 1e-12, forward_div <= 1e-12);

        // Stability: bare spectral norms on both sides, so the scan-minimum
        // argument applies verbatim on any box shape.
        if (C) {
            const double lhs = sobolev_seminorm(rec_snap.v, 0.0);
            const double rhs = *rec_snap.stability_rhs;
            add_row("stability", lhs, rhs, lhs <= rhs);
        } else {
            add_row("stability_window_commensurable", 0.0, std::nullopt, true);
        }
    } catch (const UnsolvableModeError&) {
        write_text(dir + "/summary.csv", csv);
        return exit_code::resonant;
    }

    write_text(dir + "/summary.csv", csv);
    out << csv;
    if (code != exit_code::ok)
        err << "error: acceptance check '" << failing << "' failed (see " << dir
            << "/summary.csv)\n";
    return code;
}

// ---------------------------------------------------------------------------
// transport

struct TransportOptions {
    std::string normal, F, half_widths, surface_counts, h_profile = "zero",
                trace_profile = "zero", out_dir;
    double s_half_width = 1.0;
    int s_count = 33;
};

namespace detail {

/// Analytic profile grammar: "zero", "constant:c1,..,cd",
/// "cosine:w1,..,wd|a1,..,ad|phase", "gaussian:c1,..,cd|sigma|a1,..,ad".
template <int D>
std::function<std::array<double, D>(const Vec<D>&)> parse_profile(const std::string& text,
                                                                  const std::string& what) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    const auto blocks = split(rest, '|');
    auto block_vec = [&](std::size_t i) {
        const auto v = parse_doubles(blocks.at(i), what);
        if (v.size() != static_cast<std::size_t>(D))
            throw std::invalid_argument(what + ": profile block needs one entry per dimension");
        return to_vec<D>(v);
    };

    if (name == "zero") {
        return [](const Vec<D>&) { return std::array<double, D>{}; };
    }
    if (name == "constant") {
        if (blocks.size() != 1 || rest.empty())
            throw std::invalid_argument(what + ": constant profile needs component list");
        const auto c = block_vec(0);
        return [c](const Vec<D>&) {
            std::array<double, D> r{};
            for (int i = 0; i < D; ++i) r[static_cast<std::size_t>(i)] = c[i];
            return r;
        };
    }
    if (name == "cosine") {
        if (blocks.size() != 3)
            throw std::invalid_argument(what + ": cosine profile needs wave|amplitude|phase");
        const auto w = block_vec(0);
        const auto a = block_vec(1);
        const double phase = parse_double(blocks[2], what);
        return [w, a, phase](const Vec<D>& x) {
            const double p = std::cos(vec::dot<D>(x, w) + phase);
            std::array<double, D> r{};
            for (int i = 0; i < D; ++i) r[static_cast<std::size_t>(i)] = a[i] * p;
            return r;
        };
    }
    if (name == "gaussian") {
        if (blocks.size() != 3)
            throw std::invalid_argument(what + ": gaussian profile needs center|sigma|amplitude");
        const auto c = block_vec(0);
        const double sigma = parse_double(blocks[1], what);
        if (!(sigma > 0.0)) throw std::invalid_argument(what + ": gaussian sigma must be positive");
        const auto a = block_vec(2);
        return [c, sigma, a](const Vec<D>& x) {
            double q = 0.0;
            for (int i = 0; i < D; ++i) q += (x[i] - c[i]) * (x[i] - c[i]);
            const double p = std::exp(-q / (sigma * sigma));
            std::array<double, D> r{};
            for (int i = 0; i < D; ++i) r[static_cast<std::size_t>(i)] = a[i] * p;
            return r;
        };
    }
    throw std::invalid_argument(what + ": unknown profile '" + name + "'");
}

} // namespace detail

template <int D>
int run_transport(const TransportOptions& opt, std::ostream& out) {
    using namespace detail;
    const auto n = parse_doubles(opt.normal, "--normal");
    const auto Fv = parse_doubles(opt.F, "--F");
    if (n.size() != static_cast<std::size_t>(D) || Fv.size() != static_cast<std::size_t>(D))
        throw std::invalid_argument("--normal and --F must have one component per dimension");
    const HyperplaneChart<D> chart(to_vec<D>(n), BackgroundField<D>(to_vec<D>(Fv)));

    const auto W = parse_doubles(opt.half_widths, "--half-widths");
    const auto M = parse_ints(opt.surface_counts, "--surface-counts");
    if (W.size() != static_cast<std::size_t>(D - 1) || M.size() != static_cast<std::size_t>(D - 1))
        throw std::invalid_argument(
            "--half-widths and --surface-counts need one entry per tangent direction");
    SlabSpec<D> spec;
    for (int i = 0; i < D - 1; ++i) {
        spec.half_widths[i] = W[static_cast<std::size_t>(i)];
        spec.surface_counts[i] = M[static_cast<std::size_t>(i)];
    }
    spec.s_half_width = opt.s_half_width;
    spec.s_count = opt.s_count;

    const auto h_fn = parse_profile<D>(opt.h_profile, "--h-profile");
    const auto trace_fn = parse_profile<D>(opt.trace_profile, "--trace-profile");

    const auto h = sample_slab<D>(chart, spec, h_fn);
    const auto v = solve_slab(h, sample_trace<D>(chart, spec, trace_fn));
    const double residual = transport_residual_slab(v, h);

    bool div_ok = spec.s_count >= 5;
    for (int i = 0; i < D - 1; ++i) div_ok = div_ok && spec.surface_counts[i] >= 5;
    std::optional<double> div_residual;
    if (div_ok) div_residual = divergence_residual_slab(v);

    const std::string dir = resolve_out_dir(opt.out_dir);
    write_slab_field(dir + "/slab.vfld", v);

    std::string text;
    text += "magvel-transport-report v1\n";
    text += "dim " + std::to_string(D) + "\n";
    text += "normal " + opt.normal + "\n";
    text += "F " + opt.F + "\n";
    text += "h_profile " + opt.h_profile + "\n";
    text += "trace_profile " + opt.trace_profile + "\n";
    text += "s_count " + std::to_string(spec.s_count) + "\n";
    text += "transport_residual " + num(residual) + "\n";
    text += div_residual
                ? "divergence_residual " + num(*div_residual) + "\n"
                : std::string("divergence_residual skipped (grid below stencil minimum)\n");
    text += "slab_file slab.vfld\n";
    write_text(dir + "/report.txt", text);
    out << text;
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// entry point

namespace detail {

inline int list_dimension(const std::string& csv) {
    return static_cast<int>(split(csv, ',').size());
}

template <class Fn2, class Fn3>
int dispatch(int dim, Fn2&& two, Fn3&& three) {
    if (dim == 2) return two();
    if (dim == 3) return three();
    throw std::invalid_argument("dimension must be 2 or 3");
}

} // namespace detail

/// Runs one CLI invocation in-process. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"spectral toolkit for background-field induction transport"};
    app.require_subcommand(1);

    ForwardOptions fwd;
    auto* cmd_forward = app.add_subcommand(
        "forward", "evolve a magnetic field and write snapshot files");
    cmd_forward->add_option("--F", fwd.F, "background field components")->required();
    cmd_forward->add_option("--N", fwd.N, "grid counts per axis")->required();
    cmd_forward->add_option("--L", fwd.L, "box periods per axis (default 1)");
    cmd_forward->add_option("--eta", fwd.eta, "diffusivity")->required();
    cmd_forward->add_option("--times", fwd.times, "snapshot times, comma separated")->required();
    cmd_forward->add_option("--seed", fwd.seed, "seed for a random solenoidal velocity");
    cmd_forward->add_option("--band", fwd.band, "velocity band limit |k_i| <= band");
    cmd_forward->add_option("--amplitude", fwd.amplitude, "seeded velocity amplitude");
    cmd_forward->add_option("--velocity-file", fwd.velocity_file, "velocity VFLD input");
    cmd_forward->add_option("--out-dir", fwd.out_dir, "output directory");

    InvertOptions inv;
    auto* cmd_invert = app.add_subcommand(
        "invert", "reconstruct the velocity from magnetic snapshots");
    cmd_invert->add_option("--manifest", inv.manifest, "forward manifest (series path)");
    cmd_invert->add_option("--snapshot", inv.snapshot, "single snapshot VFLD (snapshot path)");
    cmd_invert->add_option("--snapshot-time", inv.snapshot_time, "time of --snapshot");
    cmd_invert->add_option("--F", inv.F, "background field (defaults to the manifest's)");
    cmd_invert->add_option("--eta", inv.eta, "diffusivity (defaults to the manifest's)");
    cmd_invert->add_option("--policy", inv.policy, "resonant policy: strict | zero-fill");
    cmd_invert->add_option("--tau", inv.tau, "stability exponent");
    cmd_invert->add_option("--kmax", inv.kmax, "resonance scan half width");
    cmd_invert->add_option("--tol", inv.tol, "float resonance tolerance");
    cmd_invert->add_option("--out-dir", inv.out_dir, "output directory");

    ResonanceOptions res;
    auto* cmd_resonance = app.add_subcommand(
        "resonance", "scan integer modes for resonances of the background field");
    cmd_resonance->add_option("--F", res.F, "background field components")->required();
    cmd_resonance->add_option("--L", res.L, "box periods per axis (default 1)");
    cmd_resonance->add_option("--kmax", res.kmax, "scan half width");
    cmd_resonance->add_option("--tol", res.tol, "float resonance tolerance");
    cmd_resonance->add_flag("--expect-incommensurable", res.expect_incommensurable,
                            "exit 5 if any resonance is found");
    cmd_resonance->add_option("--out-dir", res.out_dir, "output directory");

    DiophantineOptions dio;
    auto* cmd_diophantine = app.add_subcommand(
        "diophantine", "estimate the small-divisor constant over a scan window");
    cmd_diophantine->add_option("--F", dio.F, "background field components")->required();
    cmd_diophantine->add_option("--L", dio.L, "box periods per axis (default 1)");
    cmd_diophantine->add_option("--tau", dio.tau, "Diophantine exponent")->required();
    cmd_diophantine->add_option("--kmax", dio.kmax, "scan half width");
    cmd_diophantine->add_flag("--expect-incommensurable", dio.expect_incommensurable,
                              "exit 5 if the window contains an exact resonance");
    cmd_diophantine->add_option("--out-dir", dio.out_dir, "output directory");

    RoundtripOptions rt;
    auto* cmd_roundtrip = app.add_subcommand(
        "roundtrip", "seed a velocity, evolve, reconstruct, and check the bounds");
    cmd_roundtrip->add_option("--F", rt.F, "background field components")->required();
    cmd_roundtrip->add_option("--N", rt.N, "grid counts per axis")->required();
    cmd_roundtrip->add_option("--L", rt.L, "box periods per axis (default 1)");
    cmd_roundtrip->add_option("--eta", rt.eta, "diffusivity");
    cmd_roundtrip->add_option("--seed", rt.seed, "velocity seed");
    cmd_roundtrip->add_option("--band", rt.band, "velocity band limit");
    cmd_roundtrip->add_option("--snapshot-time", rt.snapshot_time, "snapshot-path sample time");
    cmd_roundtrip->add_option("--dt", rt.dt, "series window spacing");
    cmd_roundtrip->add_option("--window-center", rt.window_center,
                              "series window centre (default: snapshot time)");
    cmd_roundtrip->add_option("--tau", rt.tau, "stability exponent (default 1 in 2d, 2 in 3d)");
    cmd_roundtrip->add_option("--kmax", rt.kmax, "resonance scan half width (default: band)");
    cmd_roundtrip->add_option("--tol", rt.tol, "float resonance tolerance");
    cmd_roundtrip->add_option("--policy", rt.policy, "resonant policy: strict | zero-fill");
    cmd_roundtrip->add_option("--out-dir", rt.out_dir, "output directory");

    TransportOptions tr;
    auto* cmd_transport = app.add_subcommand(
        "transport", "integrate the transport equation on a characteristic slab");
    cmd_transport->add_option("--normal", tr.normal, "surface normal components")->required();
    cmd_transport->add_option("--F", tr.F, "background field components")->required();
    cmd_transport->add_option("--half-widths", tr.half_widths, "surface half widths")->required();
    cmd_transport->add_option("--surface-counts", tr.surface_counts, "surface node counts")
        ->required();
    cmd_transport->add_option("--s-half-width", tr.s_half_width, "characteristic half width");
    cmd_transport->add_option("--s-count", tr.s_count, "characteristic node count (odd)");
    cmd_transport->add_option("--h-profile", tr.h_profile,
                              "source profile: zero | constant:... | cosine:... | gaussian:...");
    cmd_transport->add_option("--trace-profile", tr.trace_profile, "trace profile, same grammar");
    cmd_transport->add_option("--out-dir", tr.out_dir, "output directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_code::ok : exit_code::config;
    }

    try {
        if (app.got_subcommand(cmd_forward))
            return detail::dispatch(detail::list_dimension(fwd.N),
                                    [&] { return run_forward<2>(fwd, out); },
                                    [&] { return run_forward<3>(fwd, out); });
        if (app.got_subcommand(cmd_invert)) {
            int dim = 0;
            if (!inv.manifest.empty()) {
                const std::string text = magvel::detail::read_file_bytes(inv.manifest);
                const auto pos = text.find("dim ");
                if (pos == std::string::npos) throw IoError(inv.manifest + ": no dim row");
                dim = std::stoi(text.substr(pos + 4));
            } else if (!inv.snapshot.empty()) {
                dim = peek_field_file(inv.snapshot).dim;
            } else {
                throw std::invalid_argument("provide --manifest or --snapshot");
            }
            return detail::dispatch(dim, [&] { return run_invert<2>(inv, out, err); },
                                    [&] { return run_invert<3>(inv, out, err); });
        }
        if (app.got_subcommand(cmd_resonance))
            return detail::dispatch(detail::list_dimension(res.F),
                                    [&] { return run_resonance<2>(res, out, err); },
                                    [&] { return run_resonance<3>(res, out, err); });
        if (app.got_subcommand(cmd_diophantine))
            return detail::dispatch(detail::list_dimension(dio.F),
                                    [&] { return run_diophantine<2>(dio, out, err); },
                                    [&] { return run_diophantine<3>(dio, out, err); });
        if (app.got_subcommand(cmd_roundtrip))
            return detail::dispatch(detail::list_dimension(rt.N),
                                    [&] { return run_roundtrip<2>(rt, out, err); },
                                    [&] { return run_roundtrip<3>(rt, out, err); });
        if (app.got_subcommand(cmd_transport))
            return detail::dispatch(detail::list_dimension(tr.normal),
                                    [&] { return run_transport<2>(tr, out); },
                                    [&] { return run_transport<3>(tr, out); });
        throw std::invalid_argument("no subcommand selected");
    } catch (const UnsolvableModeError& e) {
        // Commands that want a report file handle this themselves first.
        err << "error: " << e.what() << "\n";
        return exit_code::resonant;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::io;
    } catch (const SymmetryError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const std::out_of_range& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::config;
    }
}

} // namespace cli
} // namespace magvel
