#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ecgpcg/error.hpp"
#include "ecgpcg/metrics.hpp"

using namespace ecgpcg;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> gaussian_noise(std::size_t n, unsigned seed, double sd = 1.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist(0.0, sd);
    std::vector<double> x(n);
    for (double& v : x) v = dist(rng);
    return x;
}

std::vector<bool> all_true(std::size_t n) { return std::vector<bool>(n, true); }

// matches the frozen spectra below
std::vector<double> three_tone(std::size_t n, double fs) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::sin(2.0 * kPi * 5.0 * i / fs) + 0.5 * std::sin(2.0 * kPi * 50.0 * i / fs + 0.3) +
               0.25 * std::cos(2.0 * kPi * 120.0 * i / fs);
    }
    return x;
}

}  // namespace

TEST_CASE("snr handles the zero, perfect, and noisy reconstructions") {
    auto x = gaussian_noise(10000, 3);
    auto mask = all_true(x.size());

    std::vector<double> zeros(x.size(), 0.0);
    CHECK(snr_db(x, zeros, mask) == 0.0);

    CHECK(snr_db(x, x, mask) == 120.0);

    auto noise = gaussian_noise(x.size(), 4, std::sqrt(0.1));
    std::vector<double> yh(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) yh[i] = x[i] + noise[i];
    CHECK(snr_db(x, yh, mask) == doctest::Approx(10.0).epsilon(0.05));

    // joint scaling leaves the ratio alone
    std::vector<double> xs(x.size()), ys(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = 7.0 * x[i];
        ys[i] = 7.0 * yh[i];
    }
    CHECK(snr_db(xs, ys, mask) == doctest::Approx(snr_db(x, yh, mask)).epsilon(1e-12));
}

TEST_CASE("snr error kinds") {
    std::vector<double> x = {1.0, 2.0, 3.0};
    std::vector<double> y = {1.0, 2.0};
    CHECK_THROWS_AS(snr_db(x, y, all_true(3)), Error);

    std::vector<bool> tiny(3, false);
    tiny[0] = true;
    try {
        snr_db(x, x, tiny);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptySelection);
    }

    std::vector<double> z(5, 0.0);
    try {
        snr_db(z, z, all_true(5));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroSignal);
    }
}

TEST_CASE("correlation is affine invariant and near zero for independent noise") {
    auto x = gaussian_noise(10000, 5);
    auto mask = all_true(x.size());

    std::vector<double> y(x.size()), neg(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = 2.0 * x[i] + 3.0;
        neg[i] = -x[i];
    }
    CHECK(corr_coef(x, y, mask) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(corr_coef(x, neg, mask) == doctest::Approx(-1.0).epsilon(1e-12));

    auto other = gaussian_noise(x.size(), 6);
    CHECK(std::abs(corr_coef(x, other, mask)) < 0.05);

    std::vector<double> flat(x.size(), 2.0);
    try {
        corr_coef(x, flat, mask);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateVariance);
    }
}

TEST_CASE("welch spectra match the frozen reference bins") {
    const double fs = 1000.0;
    auto x = three_tone(10000, fs);
    auto spec = welch_psd(x, fs);
    REQUIRE(spec.freqs.size() == 501);
    CHECK(spec.resolution_hz == doctest::Approx(1.0));
    CHECK(spec.n_segments_averaged == 19);
    CHECK(spec.values[5] == doctest::Approx(0.33333333333333315).epsilon(1e-9));
    CHECK(spec.values[50] == doctest::Approx(0.08333333333333337).epsilon(1e-9));
    CHECK(spec.values[120] == doctest::Approx(0.020833333333333343).epsilon(1e-9));
    CHECK(spec.values[0] < 1e-25);
    CHECK(spec.values[300] < 1e-25);
    CHECK(spec.values[500] < 1e-25);
}

TEST_CASE("an on-bin tone concentrates power in its peak neighborhood") {
    const double fs = 1000.0;
    std::vector<double> x(10000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * kPi * 10.0 * i / fs);
    auto spec = welch_psd(x, fs);
    double total = 0.0;
    for (double v : spec.values) total += v;
    // the taper leaves two thirds in the center bin and the rest next door
    CHECK(spec.values[10] / total == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK((spec.values[9] + spec.values[10] + spec.values[11]) / total > 0.999);

    std::size_t peak = 0;
    for (std::size_t b = 1; b < spec.values.size(); ++b)
        if (spec.values[b] > spec.values[peak]) peak = b;
    CHECK(peak == 10);
}

TEST_CASE("integrated noise spectrum recovers the variance") {
    auto x = gaussian_noise(60000, 7);
    double var = 0.0, mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());

    auto spec = welch_psd(x, 1000.0);
    double integral = 0.0;
    for (double v : spec.values) integral += v * spec.resolution_hz;
    CHECK(integral == doctest::Approx(var).epsilon(0.10));
}

TEST_CASE("zero input produces an all-zero spectrum and short input is rejected") {
    std::vector<double> z(5000, 0.0);
    auto spec = welch_psd(z, 1000.0);
    for (double v : spec.values) CHECK(v == 0.0);

    std::vector<double> tiny(500, 1.0);
    try {
        welch_psd(tiny, 1000.0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SignalTooShort);
    }
}

TEST_CASE("cross spectra agree with the frozen reference and obey the bounds") {
    const double fs = 1000.0;
    auto x = three_tone(10000, fs);
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        // 3-sample delayed copy at 0.8 gain plus an extra out-of-band tone
        const std::size_t src = (i + x.size() - 3) % x.size();
        y[i] = 0.8 * x[src] + 0.1 * std::sin(2.0 * kPi * 200.0 * i / fs);
    }

    auto pxy = cross_psd(x, y, fs);
    CHECK(pxy.values[5].real() == doctest::Approx(0.2654831905608212).epsilon(1e-8));
    CHECK(pxy.values[5].imag() == doctest::Approx(-0.025095550218270462).epsilon(1e-7));
    CHECK(std::abs(pxy.values[50]) == doctest::Approx(0.066666666666666721).epsilon(1e-8));

    auto pxx = welch_psd(x, fs);
    auto self = cross_psd(x, x, fs);
    for (std::size_t b = 0; b < pxx.values.size(); ++b) {
        CHECK(std::abs(self.values[b].real() - pxx.values[b]) < 1e-12);
        CHECK(std::abs(self.values[b].imag()) < 1e-12);
    }

    std::vector<double> negx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) negx[i] = -x[i];
    auto anti = cross_psd(x, negx, fs);
    for (std::size_t b = 0; b < pxx.values.size(); ++b)
        CHECK(anti.values[b].real() == doctest::Approx(-pxx.values[b]).epsilon(1e-10));

    auto pyy = welch_psd(y, fs);
    for (std::size_t b = 0; b < pxx.values.size(); ++b)
        CHECK(std::norm(pxy.values[b]) <= pxx.values[b] * pyy.values[b] * (1.0 + 1e-9) + 1e-30);
}

TEST_CASE("coherence is one for deterministic couplings and zero on dead bins") {
    const double fs = 1000.0;
    auto x = three_tone(10000, fs);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t src = (i + x.size() - 3) % x.size();
        y[i] = 0.8 * x[src] + 0.1 * std::sin(2.0 * kPi * 200.0 * i / fs);
    }
    auto mu = coherence(x, y, fs);
    CHECK(mu.values[5] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mu.values[50] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mu.values[37] == 0.0);   // dust on both sides
    CHECK(mu.values[200] == 0.0);  // no reference power at the extra tone
    for (double v : mu.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-9);
    }

    auto same = coherence(x, x, fs);
    CHECK(same.values[5] == doctest::Approx(1.0).epsilon(1e-9));
    std::vector<double> half(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) half[i] = 0.5 * x[i];
    auto scaled = coherence(x, half, fs);
    for (std::size_t b = 0; b < same.values.size(); ++b)
        CHECK(std::abs(scaled.values[b] - same.values[b]) < 1e-9);
}

TEST_CASE("independent noise coherence stays near the estimator floor") {
    auto a = gaussian_noise(60000, 8);
    auto b = gaussian_noise(60000, 9);
    auto mu = coherence(a, b, 1000.0);
    double mean = 0.0;
    for (double v : mu.values) mean += v;
    mean /= static_cast<double>(mu.values.size());
    CHECK(mean < 0.1);

    CHECK(weighted_coherence(a, b, 1000.0) < 0.1);
}

TEST_CASE("coherence of a noisy channel tracks the power split") {
    auto s = gaussian_noise(60000, 10);
    auto n = gaussian_noise(60000, 11, 0.5);
    std::vector<double> y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) y[i] = s[i] + n[i];
    auto mu = coherence(s, y, 1000.0);
    double mean = 0.0;
    for (double v : mu.values) mean += v;
    mean /= static_cast<double>(mu.values.size());
    CHECK(mean == doctest::Approx(0.8).epsilon(0.03));
}

TEST_CASE("coherence refuses single-segment input") {
    std::vector<double> x(1000, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * kPi * 5.0 * i / 1000.0);
    try {
        coherence(x, x, 1000.0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientAveraging);
    }
}

TEST_CASE("weighted coherence averages with reference power as weight") {
    // construct x with strong 5 Hz and weak 50 Hz; y coherent only at 5 Hz
    const double fs = 1000.0;
    const std::size_t n = 60000;
    auto noise = gaussian_noise(n, 12, 0.02);
    std::vector<double> x(n), y(n);
    auto other = gaussian_noise(n, 13, 0.02);
    for (std::size_t i = 0; i < n; ++i) {
        const double strong = std::sin(2.0 * kPi * 5.0 * i / fs);
        const double weak = 0.2 * std::sin(2.0 * kPi * 50.0 * i / fs);
        x[i] = strong + weak + noise[i];
        y[i] = strong + other[i];
    }
    const double mu_bar = weighted_coherence(x, y, fs);
    auto mu = coherence(x, y, fs);
    auto pxx = welch_psd(x, fs);
    double lo = 1.0, hi = 0.0, num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < mu.values.size(); ++b) {
        if (pxx.values[b] > 0.0) {
            lo = std::min(lo, mu.values[b]);
            hi = std::max(hi, mu.values[b]);
        }
        num += pxx.values[b] * mu.values[b];
        den += pxx.values[b];
    }
    CHECK(mu_bar == doctest::Approx(num / den).epsilon(1e-12));
    CHECK(mu_bar >= lo);
    CHECK(mu_bar <= hi);
    // the strong coherent tone dominates the weight
    CHECK(mu_bar > 0.9);

    // hand-built arithmetic check on the same machinery: band-limiting to a
    // two-bin region with known values
    const double banded = weighted_coherence(x, y, fs, 1.0, 0.5, 4.0, 6.0);
    CHECK(banded > 0.95);
}

TEST_CASE("full evaluation bundles metrics and flags degenerate cases") {
    const double fs = 1000.0;
    auto x = three_tone(20000, fs);
    auto rep = evaluate(x, x, fs);
    CHECK(rep.snr_db == 120.0);
    CHECK(rep.cc == doctest::Approx(1.0));
    CHECK(rep.weighted_coherence == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.n_samples_evaluated == 18000);
    REQUIRE(!rep.coherence_curve.empty());
    bool capped = false;
    for (const auto& f : rep.flags) capped = capped || f == "snr_capped";
    CHECK(capped);

    std::vector<double> zeros(x.size(), 0.0);
    auto rep0 = evaluate(x, zeros, fs);
    CHECK(rep0.snr_db == 0.0);
    CHECK(rep0.cc == 0.0);
    CHECK(rep0.weighted_coherence == 0.0);
    bool degen = false;
    for (const auto& f : rep0.flags) degen = degen || f == "cc_degenerate";
    CHECK(degen);
}

TEST_CASE("metrics report round trips through json") {
    auto x = three_tone(20000, 1000.0);
    auto noise = gaussian_noise(x.size(), 14, 0.2);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + noise[i];
    auto rep = evaluate(x, y, 1000.0);
    auto back = MetricsReport::from_json(rep.to_json());
    CHECK(back.snr_db == rep.snr_db);
    CHECK(back.cc == rep.cc);
    CHECK(back.weighted_coherence == rep.weighted_coherence);
    CHECK(back.coherence_curve == rep.coherence_curve);
    CHECK(back.coherence_freqs == rep.coherence_freqs);
    CHECK(back.n_samples_evaluated == rep.n_samples_evaluated);
    CHECK(back.flags == rep.flags);

    CHECK_THROWS_AS(MetricsReport::from_json("not json"), Error);
    CHECK_THROWS_AS(MetricsReport::from_json("{}"), Error);
}
