#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "banditseq/bleu.hpp"
#include "banditseq/errors.hpp"
#include "banditseq/rater.hpp"
#include "support.hpp"

#include <cmath>
#include <set>

using namespace banditseq;
using testsupport::random_tokens;

TEST_SUITE("granularity") {
    TEST_CASE("bins at g = 5") {
        CHECK(pert_gran(0.25, 5) == doctest::Approx(0.2));
        CHECK(pert_gran(0.1, 5) == doctest::Approx(0.2));
        CHECK(pert_gran(0.0999, 5) == 0.0);
        CHECK(pert_gran(0.3, 5) == doctest::Approx(0.4));
        CHECK(pert_gran(0.9, 5) == 1.0);
    }

    TEST_CASE("endpoints are fixed for every g") {
        for (int g = 1; g <= 20; ++g) {
            CHECK(pert_gran(0.0, g) == 0.0);
            CHECK(pert_gran(1.0, g) == 1.0);
        }
    }

    TEST_CASE("out-of-range scores are rejected") {
        CHECK_THROWS_AS(pert_gran(-0.01, 5), ContractViolation);
        CHECK_THROWS_AS(pert_gran(1.01, 5), ContractViolation);
        CHECK_THROWS_AS(pert_gran(0.5, 0), ContractViolation);
    }

    TEST_CASE("image, idempotence and monotonicity") {
        Rng rng(1);
        for (int g = 1; g <= 10; ++g) {
            std::set<long> seen;
            double prev_s = 0.0, prev_out = 0.0;
            std::vector<double> xs(2000);
            for (double& x : xs) {
                x = rng.uniform();
            }
            std::sort(xs.begin(), xs.end());
            for (double s : xs) {
                const double out = pert_gran(s, g);
                const double k = out * g;
                CHECK(std::abs(k - std::round(k)) < 1e-12);
                seen.insert(std::lround(k));
                CHECK(pert_gran(out, g) == out);
                if (s >= prev_s) {
                    CHECK(out >= prev_out);
                }
                prev_s = s;
                prev_out = out;
            }
            CHECK(static_cast<int>(seen.size()) == g + 1);
        }
    }
}

TEST_SUITE("variance") {
    TEST_CASE("sigma fit") {
        CHECK(rating_sigma(50.0) == doctest::Approx(33.5).epsilon(1e-14));
        CHECK(rating_sigma(0.0) == 0.0);
        CHECK(rating_sigma(100.0) == doctest::Approx(0.0));
        CHECK(rating_sigma(25.0) == doctest::Approx(0.64 * 25 - 0.02));
        CHECK(rating_sigma(75.0) == doctest::Approx(-0.67 * 75 + 67.0));
    }

    TEST_CASE("lambda 0 is the identity and draws nothing") {
        Rng a(5), b(5);
        for (double s : {0.0, 0.123, 0.5, 1.0}) {
            CHECK(pert_var(s, 0.0, a) == s);
        }
        CHECK(a.next() == b.next());
    }

    TEST_CASE("Monte Carlo moments at s = 0.5") {
        const int n = 1'000'000;
        Rng rng(99);
        double s1 = 0.0, s2 = 0.0, clamped = 0.0;
        for (int i = 0; i < n; ++i) {
            Rng r = rng.fork(static_cast<std::uint64_t>(i));
            Rng r2 = r;
            const double u = pert_var_unclamped(0.5, 1.0, r);
            s1 += u;
            s2 += u * u;
            clamped += pert_var(0.5, 1.0, r2);
        }
        const double mean = s1 / n;
        const double sd = std::sqrt(s2 / n - mean * mean);
        CHECK(sd == doctest::Approx(0.335).epsilon(0.01));
        CHECK(clamped / n >= 0.47);
        CHECK(clamped / n <= 0.53);
    }

    TEST_CASE("unclamped variance is linear in lambda") {
        const int n = 1'000'000;
        const double sigma = rating_sigma(30.0) / 100.0;
        for (double lambda : {0.25, 2.0, 5.0}) {
            Rng rng(static_cast<std::uint64_t>(lambda * 100));
            double s1 = 0.0, s2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const double u = pert_var_unclamped(0.3, lambda, rng);
                s1 += u;
                s2 += u * u;
            }
            const double var = s2 / n - (s1 / n) * (s1 / n);
            CHECK(var == doctest::Approx(lambda * sigma * sigma).epsilon(0.02));
        }
    }

    TEST_CASE("clamped draws stay in the unit interval") {
        Rng rng(7);
        for (int i = 0; i < 100'000; ++i) {
            const double v = pert_var(rng.uniform(), 10.0, rng);
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
}

TEST_SUITE("skew") {
    TEST_CASE("harsh rater suppresses 0.3 below 0.08") {
        CHECK(pert_skew(0.3, 4.0) == doctest::Approx(0.0081).epsilon(1e-12));
        CHECK(pert_skew(0.3, 4.0) < 0.08);
    }

    TEST_CASE("fixed points and identity") {
        for (double rho : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            CHECK(pert_skew(0.0, rho) == 0.0);
            CHECK(pert_skew(1.0, rho) == 1.0);
        }
        for (double s : {0.1, 0.37, 0.9}) {
            CHECK(pert_skew(s, 1.0) == s);
        }
    }

    TEST_CASE("strictly increasing in s, strictly decreasing in rho") {
        Rng rng(3);
        for (int i = 0; i < 2000; ++i) {
            double a = 0.001 + 0.998 * rng.uniform(), b = 0.001 + 0.998 * rng.uniform();
            if (a == b) {
                continue;
            }
            if (a > b) {
                std::swap(a, b);
            }
            const double rho = 0.1 + 5.0 * rng.uniform();
            CHECK(pert_skew(a, rho) < pert_skew(b, rho));
            const double rho2 = rho + 0.01 + rng.uniform();
            CHECK(pert_skew(a, rho2) < pert_skew(a, rho));
        }
    }
}

TEST_SUITE("rate") {
    const TokenSeq hyp{3, 4, 5, 9, 7};
    const TokenSeq ref{3, 4, 5, 6, 7, 8};

    TEST_CASE("no perturbations is sentence BLEU exactly") {
        CHECK(rate(hyp, ref, RaterConfig{}, 17) == sentence_bleu(hyp, ref).score);
    }

    TEST_CASE("g = 1 yields only 0 or 1") {
        RaterConfig c{{Granular{1}}, 0};
        Rng rng(4);
        for (int i = 0; i < 300; ++i) {
            const TokenSeq h = random_tokens(rng, 1, 8, 3, 8);
            const TokenSeq r = random_tokens(rng, 1, 8, 3, 8);
            const double v = rate(h, r, c, static_cast<std::uint64_t>(i));
            CHECK((v == 0.0 || v == 1.0));
        }
    }

    TEST_CASE("skew then granularity composes in order") {
        CHECK(pert_gran(pert_skew(0.5, 2.0), 5) == doctest::Approx(0.2));
        Rng unused(0);
        const std::vector<Perturbation> chain{Skew{2.0}, Granular{5}};
        double s = 0.5;
        for (const auto& p : chain) {
            s = apply_perturbation(p, s, unused);
        }
        CHECK(s == doctest::Approx(0.2));
    }

    TEST_CASE("replaying a round replays the rating") {
        RaterConfig c{{Variance{2.0}, Skew{1.5}}, 1234};
        Rng rng(8);
        std::set<double> distinct;
        for (std::uint64_t round = 0; round < 200; ++round) {
            const double a = rate(hyp, ref, c, round);
            const double b = rate(hyp, ref, c, round);
            CHECK(a == b);
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
            distinct.insert(a);
        }
        CHECK(distinct.size() > 150);
        RaterConfig other = c;
        other.noise_seed = 4321;
        CHECK(rate(hyp, ref, c, 5) != rate(hyp, ref, other, 5));
    }

    TEST_CASE("invalid configurations are rejected") {
        CHECK_THROWS_AS((RaterConfig{{Granular{0}}, 0}.validate()), ContractViolation);
        CHECK_THROWS_AS((RaterConfig{{Variance{-1.0}}, 0}.validate()), ContractViolation);
        CHECK_THROWS_AS((RaterConfig{{Skew{0.0}}, 0}.validate()), ContractViolation);
        CHECK_THROWS_AS(rate(hyp, TokenSeq{}, RaterConfig{}, 0), ContractViolation);
    }

    TEST_CASE("describe names each perturbation") {
        const RaterConfig c{{Granular{5}, Variance{1.0}, Skew{2.0}}, 0};
        const std::string d = c.describe();
        CHECK(!d.empty());
        CHECK(RaterConfig{}.describe() != d);
    }
}
