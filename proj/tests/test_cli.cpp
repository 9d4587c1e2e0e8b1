#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <magvel/cli.hpp>

using namespace magvel;
using Catch::Matchers::ContainsSubstring;

namespace {

struct TempDir {
    std::string path;
    TempDir() {
        char tmpl[] = "/tmp/magvel_cliXXXXXX";
        path = mkdtemp(tmpl);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string sub(const std::string& name) const { return path + "/" + name; }
};

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("cli: parse failures and help map to the right codes") {
    CHECK(run_cli({"--help"}).code == 0);
    CHECK(run_cli({"resonance", "--help"}).code == 0);
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"no-such-command"}).code == 2);
    CHECK(run_cli({"resonance"}).code == 2);                       // missing --F
    CHECK(run_cli({"resonance", "--F", "1,1", "--bogus"}).code == 2);
    CHECK(run_cli({"diophantine", "--F", "1,2"}).code == 2);       // missing --tau
    CHECK(run_cli({"forward", "--F", "1,1,1,1", "--N", "8,8,8,8", "--eta", "1",
                   "--times", "0.1", "--seed", "1", "--band", "2"})
              .code == 2);                                         // dimension 4
}

TEST_CASE("cli: resonance scan, exact rationals") {
    TempDir dir;
    const auto r = run_cli({"resonance", "--F", "1/1,1/1", "--kmax", "8",
                            "--out-dir", dir.path});
    CHECK(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("mode exact-rational"));
    CHECK_THAT(r.out, ContainsSubstring("resonant_count 16"));
    CHECK_THAT(r.out, ContainsSubstring("resonant (1,-1)"));
    CHECK_THAT(r.out, ContainsSubstring("resonant (-1,1)"));       // negation closure
    CHECK_THAT(r.out, ContainsSubstring("incommensurable false"));
    CHECK_THAT(r.out, ContainsSubstring("witness (1,-1)"));

    const std::string csv = slurp(dir.sub("pairing.csv"));
    CHECK_THAT(csv, ContainsSubstring("k_norm,min_abs_pairing\n"));
    CHECK_THAT(csv, ContainsSubstring("1.4142135623730951,0\n"));  // shell |k|=sqrt(2) hits zero

    SECTION("expectation flag turns findings into exit 5") {
        const auto r5 = run_cli({"resonance", "--F", "1/1,1/1", "--kmax", "8",
                                 "--expect-incommensurable", "--out-dir", dir.path});
        CHECK(r5.code == 5);
        CHECK_THAT(r5.err, ContainsSubstring("16 resonant mode(s)"));
    }
}

TEST_CASE("cli: resonance scan, float threshold path") {
    TempDir dir;
    const auto r = run_cli({"resonance", "--F", "1,1.4142135623730951", "--kmax", "16",
                            "--expect-incommensurable", "--out-dir", dir.path});
    CHECK(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("mode float-threshold"));
    CHECK_THAT(r.out, ContainsSubstring("resonant_count 0"));

    // "1,1" has no decimal marks, so it must take the exact-rational path.
    const auto rx = run_cli({"resonance", "--F", "1,1", "--kmax", "4", "--out-dir", dir.path});
    CHECK_THAT(rx.out, ContainsSubstring("mode exact-rational"));
    // "1.0,1.0" has decimal marks, so it must not.
    const auto rf = run_cli({"resonance", "--F", "1.0,1.0", "--kmax", "4", "--out-dir", dir.path});
    CHECK_THAT(rf.out, ContainsSubstring("mode float-threshold"));
}

TEST_CASE("cli: diophantine estimate and envelope") {
    TempDir dir;
    const auto r = run_cli({"diophantine", "--F", "1,1.4142135623730951", "--tau", "1",
                            "--kmax", "32", "--out-dir", dir.path});
    CHECK(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("argmin (1,-1)"));
    const auto est = diophantine_estimate<2>(
        BackgroundField<2>({1.0, std::numbers::sqrt2}), Vec<2>{1.0, 1.0}, 1.0, 32);
    CHECK_THAT(r.out, ContainsSubstring("C_est " + cli::detail::num(est.C_est)));

    const std::string csv = slurp(dir.sub("envelope.csv"));
    CHECK_THAT(csv, ContainsSubstring("k_norm,pairing\n"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(est.envelope.size()) + 1);

    SECTION("exact resonance in the window trips the expectation flag") {
        const auto r5 = run_cli({"diophantine", "--F", "1,2", "--tau", "1", "--kmax", "8",
                                 "--expect-incommensurable", "--out-dir", dir.path});
        CHECK(r5.code == 5);
        CHECK_THAT(r5.err, ContainsSubstring("C_est = 0"));
    }
}

TEST_CASE("cli: forward then invert recovers the seeded velocity") {
    TempDir dir;
    const std::string fwd = dir.sub("fwd");
    const std::string inv = dir.sub("inv");

    std::string times = cli::detail::num(0.5 - 5 * 1e-3);
    for (int j = 1; j <= 10; ++j)
        times += "," + cli::detail::num(0.5 + (j - 5) * 1e-3);
    const auto rf = run_cli({"forward", "--F", "1,1.4142135623730951", "--N", "24,24",
                             "--eta", "1", "--seed", "7", "--band", "5",
                             "--times", times, "--out-dir", fwd});
    REQUIRE(rf.code == 0);
    const std::string manifest = slurp(fwd + "/manifest.txt");
    CHECK_THAT(manifest, ContainsSubstring("magvel-forward-manifest v1\n"));
    CHECK_THAT(manifest, ContainsSubstring("snapshot 0.5 snapshot_005.vfld "));

    const auto ri = run_cli({"invert", "--manifest", fwd + "/manifest.txt",
                             "--tau", "1", "--out-dir", inv});
    REQUIRE(ri.code == 0);
    const std::string report = slurp(inv + "/report.txt");
    CHECK_THAT(report, ContainsSubstring("status ok"));
    CHECK_THAT(report, ContainsSubstring("source_path series"));
    CHECK_THAT(report, ContainsSubstring("stability_rhs "));

    const auto v_seed = to_spectral(read_torus_field<2>(fwd + "/velocity.vfld"));
    const auto v_rec = to_spectral(read_torus_field<2>(inv + "/velocity.vfld"));
    CHECK(l2_norm(v_rec - v_seed) / l2_norm(v_seed) < 1e-4);

    SECTION("single-snapshot path agrees to factor-inversion accuracy") {
        const std::string inv2 = dir.sub("inv2");
        const auto r2 = run_cli({"invert", "--snapshot", fwd + "/snapshot_005.vfld",
                                 "--snapshot-time", "0.5", "--eta", "1",
                                 "--F", "1,1.4142135623730951", "--out-dir", inv2});
        REQUIRE(r2.code == 0);
        const auto v2 = to_spectral(read_torus_field<2>(inv2 + "/velocity.vfld"));
        CHECK(l2_norm(v2 - v_seed) / l2_norm(v_seed) < 1e-10);
    }
}

TEST_CASE("cli: resonant source energy is a reported obstruction") {
    TempDir dir;

    // b = (1,1) cos(2 pi (x1 - x2)): solenoidal, energy exactly on the
    // modes +-(1,-1), which the field F = (1,1) cannot reach.
    const TorusLattice<2> lat({1.0, 1.0}, {16, 16});
    std::vector<double> data(2 * lat.point_count());
    GridVectorField<2> b = [&] {
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < 16; ++i)
                for (int j = 0; j < 16; ++j) {
                    const double phase = 2.0 * std::numbers::pi * (i - j) / 16.0;
                    data[static_cast<std::size_t>(c) * lat.point_count() +
                         static_cast<std::size_t>(i) * 16 + j] = std::cos(phase);
                }
        return GridVectorField<2>(lat, data);
    }();
    write_torus_field(dir.sub("b.vfld"), b);

    const auto r = run_cli({"invert", "--snapshot", dir.sub("b.vfld"),
                            "--snapshot-time", "0.5", "--eta", "1", "--F", "1,1",
                            "--out-dir", dir.sub("out")});
    CHECK(r.code == 4);
    CHECK_THAT(r.err, ContainsSubstring("resonant mode(s)"));
    CHECK_THAT(r.err, ContainsSubstring("incommensurability hypothesis"));
    const std::string report = slurp(dir.sub("out") + "/report.txt");
    CHECK_THAT(report, ContainsSubstring("status resonant-obstruction"));
    CHECK_THAT(report, ContainsSubstring("offending_mode (-1,1)"));
    CHECK_THAT(report, ContainsSubstring("offending_mode (1,-1)"));

    SECTION("zero-fill policy drops that energy instead") {
        const auto rz = run_cli({"invert", "--snapshot", dir.sub("b.vfld"),
                                 "--snapshot-time", "0.5", "--eta", "1", "--F", "1,1",
                                 "--policy", "zero-fill", "--out-dir", dir.sub("zf")});
        CHECK(rz.code == 0);
        const std::string zr = slurp(dir.sub("zf") + "/report.txt");
        CHECK_THAT(zr, ContainsSubstring("policy zero-fill"));
        // The whole source sat on resonant modes; only grid-transform dust
        // (spread below 1e-15 of the data) can survive on the others.
        const auto v = to_spectral(read_torus_field<2>(dir.sub("zf") + "/velocity.vfld"));
        CHECK(l2_norm(v) < 1e-12);
    }
}

TEST_CASE("cli: roundtrip command passes off resonance and fails on it") {
    TempDir dir;
    const auto r = run_cli({"roundtrip", "--F", "1,1.4142135623730951", "--N", "32,32",
                            "--eta", "1", "--seed", "11", "--band", "8",
                            "--out-dir", dir.sub("ok")});
    CHECK(r.code == 0);
    const std::string csv = slurp(dir.sub("ok") + "/summary.csv");
    CHECK_THAT(csv, ContainsSubstring("check,value,bound,pass\n"));
    CHECK_THAT(csv, ContainsSubstring("snapshot_path_error,"));
    CHECK_THAT(csv, ContainsSubstring("series_path_error,"));
    CHECK_THAT(csv, ContainsSubstring("stability,"));
    CHECK(csv.find(",0\n") == std::string::npos);  // no failing row

    // A commensurable field hides the resonant velocity component, so the
    // round trip must refuse: reconstruction mismatch (6) or obstruction (4).
    const auto rb = run_cli({"roundtrip", "--F", "1,1", "--N", "16,16", "--seed", "5",
                             "--band", "4", "--out-dir", dir.sub("bad")});
    CHECK((rb.code == 6 || rb.code == 4));
    if (rb.code == 6) CHECK_THAT(rb.err, ContainsSubstring("snapshot_path_error"));
}

TEST_CASE("cli: identical invocations produce byte-identical outputs") {
    TempDir dir;
    const std::vector<std::string> base{"roundtrip", "--F", "1,1.4142135623730951",
                                        "--N", "16,16", "--seed", "3", "--band", "4"};
    auto with_dir = [&](const std::string& d) {
        auto v = base;
        v.push_back("--out-dir");
        v.push_back(d);
        return v;
    };
    REQUIRE(run_cli(with_dir(dir.sub("a"))).code == 0);
    REQUIRE(run_cli(with_dir(dir.sub("b"))).code == 0);
    for (const std::string name :
         {"v_true.vfld", "v_snapshot.vfld", "v_series.vfld", "summary.csv"}) {
        CHECK(slurp(dir.sub("a") + "/" + name) == slurp(dir.sub("b") + "/" + name));
    }
}

TEST_CASE("cli: transport command writes a consistent slab") {
    TempDir dir;
    const auto r = run_cli({"transport", "--normal", "1,0", "--F", "2,1",
                            "--half-widths", "1", "--surface-counts", "9",
                            "--s-count", "17", "--h-profile", "constant:0.5,1",
                            "--trace-profile", "zero", "--out-dir", dir.path});
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("transport_residual 0\n"));  // constant h is exact

    const auto slab = read_slab_field<2>(dir.sub("slab.vfld"));
    CHECK(slab.spec().s_count == 17);
    const double res = transport_residual_slab(
        slab, sample_slab<2>(slab.chart(), slab.spec(),
                             [](const Vec<2>&) { return std::array<double, 2>{0.5, 1.0}; }));
    CHECK(res == 0.0);

    SECTION("characteristic surface is refused with the hypothesis named") {
        const auto rc = run_cli({"transport", "--normal", "1,-2", "--F", "2,1",
                                 "--half-widths", "1", "--surface-counts", "9",
                                 "--out-dir", dir.path});
        CHECK(rc.code == 2);
        CHECK_THAT(rc.err, ContainsSubstring("characteristic"));
        CHECK_THAT(rc.err, ContainsSubstring("non-characteristic surface"));
    }

    SECTION("profile grammar rejects malformed specs") {
        CHECK(run_cli({"transport", "--normal", "1,0", "--F", "2,1", "--half-widths", "1",
                       "--surface-counts", "9", "--h-profile", "cosine:1,0",
                       "--out-dir", dir.path})
                  .code == 2);
        CHECK(run_cli({"transport", "--normal", "1,0", "--F", "2,1", "--half-widths", "1",
                       "--surface-counts", "9", "--h-profile", "warp:1,0",
                       "--out-dir", dir.path})
                  .code == 2);
    }
}

TEST_CASE("cli: io failures exit 3 and name the path") {
    TempDir dir;
    const auto r = run_cli({"invert", "--manifest", dir.sub("absent") + "/manifest.txt"});
    CHECK(r.code == 3);
    CHECK_THAT(r.err, ContainsSubstring("manifest.txt"));

    const auto r2 = run_cli({"invert", "--snapshot", dir.sub("nothing.vfld"),
                             "--snapshot-time", "0.5", "--eta", "1", "--F", "1,2"});
    CHECK(r2.code == 3);
}

TEST_CASE("cli: non-solenoidal velocity input is refused with the hypothesis named") {
    TempDir dir;
    const TorusLattice<2> lat({1.0, 1.0}, {16, 16});
    std::vector<double> data(2 * lat.point_count());
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j)
                data[static_cast<std::size_t>(c) * lat.point_count() +
                     static_cast<std::size_t>(i) * 16 + j] =
                    std::cos(2.0 * std::numbers::pi * (c == 0 ? i : j) / 16.0);
    write_torus_field(dir.sub("v.vfld"), GridVectorField<2>(lat, data));

    const auto r = run_cli({"forward", "--F", "1,2", "--N", "16,16", "--eta", "1",
                            "--times", "0.1", "--velocity-file", dir.sub("v.vfld"),
                            "--out-dir", dir.sub("out")});
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("divergence residual"));
    CHECK_THAT(r.err, ContainsSubstring("not solenoidal"));
}

TEST_CASE("cli: output directory falls back to the environment override") {
    TempDir dir;
    setenv("MAGVEL_OUT_DIR", dir.sub("via_env").c_str(), 1);
    const auto r = run_cli({"resonance", "--F", "1,3", "--kmax", "4"});
    unsetenv("MAGVEL_OUT_DIR");
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir.sub("via_env") + "/resonance.txt"));
    CHECK(std::filesystem::exists(dir.sub("via_env") + "/pairing.csv"));
}
