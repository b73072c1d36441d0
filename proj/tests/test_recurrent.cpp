#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sthar/gradcheck_suites.hpp"
#include "sthar/recurrent.hpp"

using namespace sthar;

namespace {

// Plain scalar-loop oracles, written independently of the tensor ops.
using Vec = std::vector<double>;

Vec preact(const Tensor64& W, const Tensor64& U, const Tensor64& b, const Vec& h, const Vec& x) {
    Vec out(W.rows());
    for (std::size_t i = 0; i < W.rows(); ++i) {
        double acc = b.data()[i];
        for (std::size_t j = 0; j < W.cols(); ++j) acc += W.at(i, j) * h[j];
        for (std::size_t j = 0; j < U.cols(); ++j) acc += U.at(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Vec rnn_oracle(const RnnCellParams<double>& p, const Vec& h, const Vec& x) {
    Vec a = preact(p.W, p.U, p.b, h, x);
    for (auto& v : a) v = std::tanh(v);
    return a;
}

void lstm_oracle(const LstmParams<double>& p, Vec& h, Vec& c, const Vec& x) {
    Vec f = preact(p.f.W, p.f.U, p.f.b, h, x);
    Vec i = preact(p.i.W, p.i.U, p.i.b, h, x);
    Vec cd = preact(p.c.W, p.c.U, p.c.b, h, x);
    Vec o = preact(p.o.W, p.o.U, p.o.b, h, x);
    for (std::size_t k = 0; k < h.size(); ++k) {
        c[k] = sig(f[k]) * c[k] + sig(i[k]) * std::tanh(cd[k]);
        h[k] = std::tanh(c[k]) * sig(o[k]);
    }
}

void gru_oracle(const GruParams<double>& p, Vec& h, const Vec& x) {
    Vec z = preact(p.z.W, p.z.U, p.z.b, h, x);
    Vec rh(h.size());
    {
        Vec r = preact(p.r.W, p.r.U, p.r.b, h, x);
        for (std::size_t k = 0; k < h.size(); ++k) rh[k] = sig(r[k]) * h[k];
    }
    Vec cd = preact(p.h.W, p.h.U, p.h.b, rh, x);
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double zk = sig(z[k]);
        h[k] = zk * std::tanh(cd[k]) + (1.0 - zk) * h[k];
    }
}

Vec col(const Tensor64& t) { return t.data(); }

}  // namespace

TEST_CASE("vanilla cell tracks the scalar oracle over 1000 random steps") {
    const std::size_t n_h = 5, n_x = 3;
    std::mt19937_64 rng(11);
    auto p = RnnCellParams<double>::make(n_h, n_x, rng);
    Tensor64 h = Tensor64::zeros({n_h, 1});
    Vec oh(n_h, 0.0);
    for (int t = 0; t < 1000; ++t) {
        Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);
        h = vanilla_step(p, h, x);
        oh = rnn_oracle(p, oh, col(x));
        for (std::size_t k = 0; k < n_h; ++k) CHECK(std::abs(h.data()[k] - oh[k]) <= 1e-10);
    }
}

TEST_CASE("lstm cell tracks the scalar oracle over 1000 random steps") {
    const std::size_t n_h = 5, n_x = 3;
    std::mt19937_64 rng(12);
    auto p = LstmParams<double>::make(n_h, n_x, rng);
    Tensor64 h = Tensor64::zeros({n_h, 1}), c = Tensor64::zeros({n_h, 1});
    Vec oh(n_h, 0.0), oc(n_h, 0.0);
    for (int t = 0; t < 1000; ++t) {
        Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);
        auto [hn, cn] = lstm_step(p, h, c, x);
        h = hn;
        c = cn;
        lstm_oracle(p, oh, oc, col(x));
        for (std::size_t k = 0; k < n_h; ++k) {
            CHECK(std::abs(h.data()[k] - oh[k]) <= 1e-10);
            CHECK(std::abs(c.data()[k] - oc[k]) <= 1e-10);
        }
    }
}

TEST_CASE("gru cell tracks the scalar oracle over 1000 random steps") {
    const std::size_t n_h = 5, n_x = 3;
    std::mt19937_64 rng(13);
    auto p = GruParams<double>::make(n_h, n_x, rng);
    Tensor64 h = Tensor64::zeros({n_h, 1});
    Vec oh(n_h, 0.0);
    for (int t = 0; t < 1000; ++t) {
        Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);
        h = gru_step(p, h, x);
        gru_oracle(p, oh, col(x));
        for (std::size_t k = 0; k < n_h; ++k) CHECK(std::abs(h.data()[k] - oh[k]) <= 1e-10);
    }
}

TEST_CASE("all-zero-parameter lstm from zero state gives h = tanh(0.5)·0.5") {
    // With every weight and bias zero: f=i=o=0.5, cand=0, c=0.25·0... after
    // one step c = 0, h = 0. With c_prev = 1: c = 0.5, h = tanh(0.5)·0.5.
    LstmParams<double> p{
        {Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1})},
        {Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1})},
        {Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1})},
        {Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1}), Tensor64::zeros({1, 1})}};
    Tensor64 h0 = Tensor64::zeros({1, 1});
    Tensor64 c0 = Tensor64::full({1, 1}, 1.0);
    Tensor64 x = Tensor64::zeros({1, 1});
    auto [h, c] = lstm_step(p, h0, c0, x);
    CHECK(c.item() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(h.item() - 0.23105857863) < 1e-5);  // tanh(0.5)·0.5
}

TEST_CASE("saturated gates pin the lstm") {
    const std::size_t n_h = 2, n_x = 2;
    std::mt19937_64 rng(14);
    auto p = LstmParams<double>::make(n_h, n_x, rng);
    Tensor64 h0 = Tensor64::uniform({n_h, 1}, -1, 1, rng);
    Tensor64 c0 = Tensor64::uniform({n_h, 1}, -1, 1, rng);
    Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);

    SUBCASE("forget=+20, input=-20 copies the cell state") {
        for (auto& v : p.f.b.data()) v = 20.0;
        for (auto& v : p.i.b.data()) v = -20.0;
        auto [h, c] = lstm_step(p, h0, c0, x);
        for (std::size_t k = 0; k < n_h; ++k)
            CHECK(c.data()[k] == doctest::Approx(c0.data()[k]).epsilon(1e-6));
    }
    SUBCASE("output=-20 silences the hidden state") {
        for (auto& v : p.o.b.data()) v = -20.0;
        auto [h, c] = lstm_step(p, h0, c0, x);
        for (std::size_t k = 0; k < n_h; ++k) CHECK(std::abs(h.data()[k]) < 1e-6);
    }
}

TEST_CASE("saturated gru update gate selects candidate or previous state") {
    const std::size_t n_h = 2, n_x = 2;
    std::mt19937_64 rng(15);
    auto p = GruParams<double>::make(n_h, n_x, rng);
    Tensor64 h0 = Tensor64::uniform({n_h, 1}, -1, 1, rng);
    Tensor64 x = Tensor64::uniform({n_x, 1}, -1, 1, rng);

    SUBCASE("z=-20 keeps h_prev") {
        for (auto& v : p.z.b.data()) v = -20.0;
        Tensor64 h = gru_step(p, h0, x);
        for (std::size_t k = 0; k < n_h; ++k)
            CHECK(h.data()[k] == doctest::Approx(h0.data()[k]).epsilon(1e-6));
    }
    SUBCASE("z=+20 replaces h with the candidate") {
        for (auto& v : p.z.b.data()) v = 20.0;
        Tensor64 h = gru_step(p, h0, x);
        // Candidate recomputed via the oracle.
        Vec oh = col(h0);
        gru_oracle(p, oh, col(x));
        for (std::size_t k = 0; k < n_h; ++k)
            CHECK(h.data()[k] == doctest::Approx(oh[k]).epsilon(1e-8));
    }
}

TEST_CASE("run_many_to_one equals manual step iteration") {
    const std::size_t n_h = 4, n_x = 3, T = 7;
    std::mt19937_64 rng(16);
    auto p = LstmParams<double>::make(n_h, n_x, rng);
    std::vector<Tensor64> xs;
    for (std::size_t t = 0; t < T; ++t) xs.push_back(Tensor64::uniform({n_x, 1}, -1, 1, rng));

    CellParamsAny<double> any{CellKind::Lstm, std::nullopt, p, std::nullopt};
    Tensor64 h_run = run_many_to_one(any, xs);

    Tensor64 h = Tensor64::zeros({n_h, 1}), c = Tensor64::zeros({n_h, 1});
    for (const auto& x : xs) {
        auto [hn, cn] = lstm_step(p, h, c, x);
        h = hn;
        c = cn;
    }
    for (std::size_t k = 0; k < n_h; ++k)
        CHECK(h_run.data()[k] == doctest::Approx(h.data()[k]).epsilon(1e-14));

    CHECK_THROWS_AS(run_many_to_one(any, {}), ContractError);
}

TEST_CASE("lstm init uses forget bias one") {
    std::mt19937_64 rng(17);
    auto p = LstmParams<double>::make(3, 2, rng);
    for (double v : p.f.b.data()) CHECK(v == 1.0);
    for (double v : p.i.b.data()) CHECK(v == 0.0);
}

TEST_CASE("cell gradient suite passes at 1e-5") {
    for (const auto& c : gradcheck_cells()) {
        INFO(c.name);
        CHECK(c.passed());
    }
}
