#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "magvel/arithmetic.hpp"

using namespace magvel;

TEST_CASE("rational parsing and arithmetic", "[rational]") {
    CHECK(Rational::parse("3/4") == Rational(3, 4));
    CHECK(Rational::parse("-3/4") == Rational(-3, 4));
    CHECK(Rational::parse(" 2 ") == Rational(2));
    CHECK(Rational::parse("0.5") == Rational(1, 2));
    CHECK(Rational::parse("-2.25") == Rational(-9, 4));
    CHECK(Rational::parse("6/-4") == Rational(-3, 2));  // normalized sign
    CHECK(Rational(2, 4) == Rational(1, 2));            // normalized gcd

    CHECK(Rational(1, 2) + Rational(1, 3) == Rational(5, 6));
    CHECK(Rational(1, 2) - Rational(1, 2) == Rational(0));
    CHECK(Rational(2, 3) * Rational(3, 4) == Rational(1, 2));
    CHECK(3 * Rational(1, 6) == Rational(1, 2));
    CHECK(Rational(1, 3).to_double() == 1.0 / 3.0);

    CHECK_THROWS_AS(Rational::parse("abc"), std::invalid_argument);
    CHECK_THROWS_AS(Rational::parse("1/0"), std::invalid_argument);
    CHECK_THROWS_AS(Rational::parse("1.2.3"), std::invalid_argument);
    CHECK_THROWS_AS(Rational::parse("sqrt(2)"), std::invalid_argument);
    CHECK_THROWS_AS(Rational::parse(""), std::invalid_argument);
    CHECK_THROWS_AS(Rational(1, 0), std::invalid_argument);

    const Rational big(INT64_MAX, 1);
    CHECK_THROWS_AS(big + big, std::overflow_error);
}

TEST_CASE("exact-rational resonance scan", "[arithmetic]") {
    SECTION("F=(1,1) on the unit torus") {
        const auto report = resonant_set<2>({Rational(1), Rational(1)}, 2);
        CHECK(report.mode == "exact-rational");
        CHECK(report.kmax == 2);
        const std::vector<Mode<2>> expected{{-2, 2}, {-1, 1}, {1, -1}, {2, -2}};
        auto sorted = report.resonant_modes;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == expected);
        CHECK(report.min_abs_pairing == 0.0);
        CHECK(report.argmin == Mode<2>{1, -1});  // sign-canonical argmin
    }

    SECTION("F=(2,3) has exactly one witness pair up to kmax=3") {
        const auto report = resonant_set<2>({Rational(2), Rational(3)}, 3);
        auto sorted = report.resonant_modes;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == std::vector<Mode<2>>{{-3, 2}, {3, -2}});
    }

    SECTION("reports are closed under negation") {
        const auto report = resonant_set<3>({Rational(1), Rational(2), Rational(-1)}, 2);
        for (const auto& k : report.resonant_modes) {
            Mode<3> neg{-k[0], -k[1], -k[2]};
            CHECK(std::count(report.resonant_modes.begin(), report.resonant_modes.end(), neg) == 1);
        }
        CHECK_FALSE(report.resonant_modes.empty());  // (1,0,1) kills 1*1 + 1*(-1)
    }

    SECTION("argument validation") {
        CHECK_THROWS_AS((resonant_set<2>({Rational(1), Rational(1)}, 0)), std::invalid_argument);
    }
}

TEST_CASE("float-threshold resonance scan", "[arithmetic]") {
    const Vec<2> unit{1.0, 1.0};

    SECTION("irrational direction has an empty resonant set") {
        BackgroundField<2> F({1.0, std::sqrt(2.0)});
        const auto report = resonant_set<2>(F, unit, 64, 1e-12);
        CHECK(report.mode == "float-threshold");
        CHECK(report.tolerance == 1e-12);
        CHECK(report.resonant_modes.empty());
        CHECK(report.min_abs_pairing > 0.0);

        // |F.g| is even in k, so the minimum is attained at the negate too.
        double at_neg = 0.0;
        const auto& a = report.argmin;
        at_neg = std::abs(F[0] * -a[0] + F[1] * -a[1]);
        CHECK(at_neg == report.min_abs_pairing);
    }

    SECTION("agrees with the exact scan on rational input") {
        BackgroundField<2> F({2.0, 3.0});
        const auto exact = resonant_set<2>({Rational(2), Rational(3)}, 3);
        const auto floaty = resonant_set<2>(F, unit, 3, 0.5);  // below min nonzero |F.g| = 1
        CHECK(exact.resonant_modes == floaty.resonant_modes);
        CHECK(floaty.min_abs_pairing == 0.0);
    }

    SECTION("tolerance validation") {
        BackgroundField<2> F({1.0, 2.0});
        CHECK_THROWS_AS(resonant_set<2>(F, unit, 4, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(resonant_set<2>(F, unit, 4, -1.0), std::invalid_argument);
    }
}

TEST_CASE("rational independence decision with witness", "[arithmetic]") {
    SECTION("equal components") {
        const auto r = is_incommensurable({Rational(1), Rational(1)});
        CHECK_FALSE(r.incommensurable);
        CHECK(r.witness == std::vector<long long>{1, -1});
    }
    SECTION("zero component") {
        const auto r = is_incommensurable({Rational(1), Rational(0)});
        CHECK_FALSE(r.incommensurable);
        CHECK(r.witness == std::vector<long long>{0, 1});
    }
    SECTION("three integers") {
        const auto r = is_incommensurable({Rational(2), Rational(3), Rational(5)});
        CHECK_FALSE(r.incommensurable);
        REQUIRE(r.witness.size() == 3);
        long long dot = 2 * r.witness[0] + 3 * r.witness[1] + 5 * r.witness[2];
        CHECK(dot == 0);
        CHECK(r.witness != std::vector<long long>{0, 0, 0});
    }
    SECTION("fractions") {
        const auto r = is_incommensurable({Rational(1, 2), Rational(3, 4)});
        CHECK_FALSE(r.incommensurable);
        REQUIRE(r.witness.size() == 2);
        CHECK(Rational(r.witness[0]) * Rational(1, 2) + Rational(r.witness[1]) * Rational(3, 4) ==
              Rational(0));
    }
    SECTION("single nonzero rational is independent") {
        const auto r = is_incommensurable({Rational(7, 3)});
        CHECK(r.incommensurable);
        CHECK(r.witness.empty());
    }
    SECTION("all-zero input is rejected") {
        CHECK_THROWS_AS(is_incommensurable({Rational(0), Rational(0)}), std::invalid_argument);
        CHECK_THROWS_AS(is_incommensurable({}), std::invalid_argument);
    }
}

TEST_CASE("Diophantine constant estimation", "[arithmetic]") {
    const Vec<2> unit{1.0, 1.0};

    SECTION("irrational direction stays positive, nonincreasing in kmax") {
        BackgroundField<2> F({1.0, std::sqrt(2.0)});
        const auto e16 = diophantine_estimate<2>(F, unit, 1.0, 16);
        const auto e64 = diophantine_estimate<2>(F, unit, 1.0, 64);
        CHECK(e16.C_est > 0.0);
        CHECK(e64.C_est > 0.0);
        CHECK(e64.C_est <= e16.C_est);
        CHECK(e64.tau == 1.0);
        CHECK(e64.kmax == 64);
    }

    SECTION("independent brute-force oracle at kmax=8") {
        BackgroundField<2> F({1.0, std::sqrt(2.0)});
        const auto est = diophantine_estimate<2>(F, unit, 1.0, 8);
        double oracle = std::numeric_limits<double>::infinity();
        for (int k1 = -8; k1 <= 8; ++k1)
            for (int k2 = -8; k2 <= 8; ++k2) {
                if (k1 == 0 && k2 == 0) continue;
                const double pairing = std::abs(k1 + std::sqrt(2.0) * k2);
                const double knorm = std::sqrt(double(k1) * k1 + double(k2) * k2);
                oracle = std::min(oracle, pairing * std::pow(knorm, 1.0));
            }
        CHECK_THAT(est.C_est, Catch::Matchers::WithinRel(oracle, 1e-13));
    }

    SECTION("resonant direction gives exactly zero at the canonical argmin") {
        BackgroundField<2> F({1.0, 1.0});
        const auto est = diophantine_estimate<2>(F, unit, 1.5, 4);
        CHECK(est.C_est == 0.0);
        CHECK(est.argmin_k == Mode<2>{1, -1});
    }

    SECTION("3-d paper-style field is Diophantine over the window") {
        BackgroundField<3> F({1.0, std::sqrt(2.0), std::sqrt(3.0)});
        const auto est = diophantine_estimate<3>(F, Vec<3>{1.0, 1.0, 1.0}, 2.0, 32);
        CHECK(est.C_est > 0.0);
    }

    SECTION("envelope is a strictly decreasing staircase in |k|") {
        BackgroundField<2> F({1.0, std::sqrt(2.0)});
        const auto est = diophantine_estimate<2>(F, unit, 1.0, 32);
        REQUIRE(est.envelope.size() >= 2);
        for (std::size_t i = 1; i < est.envelope.size(); ++i) {
            CHECK(est.envelope[i].k_norm > est.envelope[i - 1].k_norm);
            CHECK(est.envelope[i].pairing < est.envelope[i - 1].pairing);
        }
        CHECK(est.envelope.front().k_norm == 1.0);
    }

    SECTION("Diophantine positivity implies an empty resonant window") {
        BackgroundField<2> F({1.0, std::sqrt(2.0)});
        const auto est = diophantine_estimate<2>(F, unit, 1.0, 32);
        REQUIRE(est.C_est > 0.0);
        const auto report = resonant_set<2>(F, unit, 32, 1e-12);
        CHECK(report.resonant_modes.empty());
    }
}
