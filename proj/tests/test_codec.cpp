#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <sstream>

#include "ajscc/codec.hpp"
#include "ajscc/ofdm_channel.hpp"
#include "ajscc/sdif.hpp"

using namespace ajscc;

TEST_CASE("encode matrix has orthonormal columns") {
    for (auto [n, m] : {std::pair{64, 32}, {64, 128}, {8, 4}, {10, 13}}) {
        const LinearCodec c(n, m, 7);
        const ComplexMatrix gram = c.matrix().adjoint() * c.matrix();
        CHECK((gram - ComplexMatrix::Identity(n / 2, n / 2)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(c.matrix().rows() == m);
        CHECK(c.matrix().cols() == n / 2);
    }
    CHECK(LinearCodec(64, 32, 7).matrix() == LinearCodec(64, 32, 7).matrix());
    CHECK(LinearCodec(64, 32, 7).matrix() != LinearCodec(64, 32, 8).matrix());
    CHECK_THROWS_AS(LinearCodec(63, 32, 1), ParameterError);
    CHECK_THROWS_AS(LinearCodec(64, 31, 1), ParameterError);
}

TEST_CASE("encode matches the explicit matrix product and is linear") {
    const LinearCodec c(64, 32, 3);
    Rng rng(1);
    const RealVector x = rng.normal_vector(64);
    ComplexVector packed(32);
    for (int i = 0; i < 32; ++i) packed[i] = Complex(x[2 * i], x[2 * i + 1]);
    const ComplexVector direct = c.matrix() * packed * std::sqrt(32.0 / 64.0);
    CHECK((c.encode(x) - direct).cwiseAbs().maxCoeff() < 1e-14);
    // Square code: ||encode(x)||^2 = (m/n) ||x||^2 = ||x||^2 / 2.
    CHECK(c.encode(x).squaredNorm() == doctest::Approx(x.squaredNorm() / 2.0).epsilon(1e-12));
    CHECK(c.encode(RealVector::Zero(64)) == ComplexVector::Zero(32));
    CHECK((c.encode(-x) + c.encode(x)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.decode(ComplexVector::Zero(32)) == RealVector::Zero(64));
    CHECK_THROWS_AS(c.encode(RealVector::Zero(62)), ParameterError);
    CHECK_THROWS_AS(c.decode(ComplexVector::Zero(31)), ParameterError);
    CHECK_THROWS_AS(pack_pairs(RealVector::Zero(5)), ParameterError);
}

TEST_CASE("average transmit power is one for a unit-variance source") {
    for (int m : {32, 128}) {
        const LinearCodec c(64, m, 5);
        Rng rng(2);
        double acc = 0.0;
        const int trials = 20000;
        for (int t = 0; t < trials; ++t) acc += c.encode(rng.normal_vector(64)).squaredNorm() / m;
        CHECK(std::abs(acc / trials - 1.0) < 0.01);
    }
}

TEST_CASE("decode inverts encode") {
    Rng rng(3);
    for (int m : {32, 77, 128}) {
        const LinearCodec c(64, m, 9);
        for (int t = 0; t < 20; ++t) {
            const RealVector x = rng.normal_vector(64);
            CHECK((c.decode(c.encode(x)) - x).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("grid mapping places every symbol in a distinct slot") {
    const LinearCodec c(64, 128, 1);
    for (int ns : {1, 2, 3, 8}) {
        const auto slots = c.grid_map(256, ns);
        REQUIRE(slots.size() == 128);
        std::set<std::pair<int, int>> seen;
        for (const auto& s : slots) {
            CHECK(s.row >= 0);
            CHECK(s.row < ns);
            CHECK(s.col >= 0);
            CHECK(s.col < 256);
            seen.insert({s.row, s.col});
        }
        CHECK(seen.size() == 128);
    }
    // One row, 128 symbols on 256 subcarriers: an every-other-bin comb.
    const auto comb = c.grid_map(256, 1);
    for (int j = 0; j < 128; ++j) CHECK(comb[static_cast<std::size_t>(j)].col == 2 * j);
    CHECK_THROWS_AS(c.grid_map(64, 1), ParameterError);

    Rng rng(4);
    const ComplexVector s = c.encode(rng.normal_vector(64));
    const ComplexGrid g = c.to_grid(s, 256, 2);
    CHECK(c.from_grid(g) == s);
    CHECK(g.cwiseAbs2().sum() == doctest::Approx(s.squaredNorm()).epsilon(1e-13));
}

TEST_CASE("noiseless identity channel with perfect CSI reconstructs exactly") {
    OfdmConfig cfg;
    cfg.noise_variance = 0.0;
    const LinearCodec c(64, 128, 7);
    Rng rng(5);
    ComplexVector one(1);
    one << 1.0;
    const RealVector x = rng.normal_vector(64);
    const auto rx = apply_channel({make_pilots(1, 256, 1), c.to_grid(c.encode(x), 256, 1)}, {one}, cfg, 2);
    const auto eq = equalize_mmse(rx.data_grid, estimate_channel_mmse(rx, 0.0), 0.0);
    CHECK((c.decode(c.from_grid(eq)) - x).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("generalized pseudoinverse property under a noiseless fading channel") {
    OfdmConfig cfg;
    cfg.noise_variance = 0.0;
    const auto profile = build_profile(8, 4.0);
    Rng rng(6);
    for (int m : {32, 128}) {
        const LinearCodec c(64, m, 7);
        for (int t = 0; t < 100; ++t) {
            const auto taps = sample_taps(profile, rng.engine()());
            const RealVector x = rng.normal_vector(64);
            const auto rx = apply_channel({make_pilots(1, 256, 3), c.to_grid(c.encode(x), 256, 1)}, taps, cfg,
                                          rng.engine()());
            const ComplexVector H = frequency_response(taps, 256).response;
            const ComplexVector Hs = c.gather(H, 1);
            const ComplexVector y = c.from_grid(rx.data_grid);
            const RealVector x_pinv = c.decode(y.cwiseQuotient(Hs));
            const ComplexVector y_again = Hs.cwiseProduct(c.encode(x_pinv));
            CHECK((y_again - y).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("SDIF round trip and header layout") {
    Rng rng(7);
    ComplexGrid g(3, 5);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 5; ++c) g(r, c) = rng.complex_normal(1.0);
    std::stringstream buf;
    write_sdif(buf, g);
    const std::string bytes = buf.str();
    REQUIRE(bytes.size() == 16 + 3 * 5 * 16);
    CHECK(bytes.substr(0, 4) == "SDIF");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[8]) == 3);
    CHECK(static_cast<unsigned char>(bytes[12]) == 5);
    double first_re = 0.0;
    std::memcpy(&first_re, bytes.data() + 16, 8);
    CHECK(first_re == g(0, 0).real());
    CHECK(read_sdif(buf) == g);

    std::stringstream bad("XXXX0000000000000000");
    CHECK_THROWS_AS(read_sdif(bad), IoError);

    OfdmReception rx;
    rx.pilot_grid = g.topRows(1);
    rx.data_grid = g;
    rx.pilot_ref = make_pilots(1, 5, 2);
    const std::string path = "sdif_roundtrip_test.sdif";
    save_reception(path, rx);
    const auto back = load_reception(path);
    CHECK(back.pilot_grid == rx.pilot_grid);
    CHECK(back.data_grid == rx.data_grid);
    CHECK(back.pilot_ref == rx.pilot_ref);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_reception("does/not/exist.sdif"), IoError);
}
