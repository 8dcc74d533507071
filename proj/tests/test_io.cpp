#include <doctest.h>

#include <random>

#include "grbm/error.hpp"
#include "grbm/io.hpp"

using namespace grbm;
using nlohmann::json;

TEST_CASE("shortest formatting round-trips") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
        CHECK(std::stod(io::format_shortest(v)) == v);
        CHECK(std::stod(io::format_17g(v)) == v);
    }
    CHECK(io::format_shortest(0.1) == "0.1");
    CHECK(io::format_shortest(2.0) == "2");
}

TEST_CASE("ModelSpec JSON round trip is bit exact") {
    Matrix g(3, 3);
    g << 1.0 / 3, 0.1, 0.2, 0.1, 2.0 / 7, 1e-17, 0.2, 1e-17, 3.141592653589793;
    Vector mu(3);
    mu << -0.1, -1.0 / 3, -2.5e-8;
    const auto spec = model::make_tandem_model(g, mu, 0.7);
    const std::string text = io::model_to_json_text(spec);
    const auto back = io::model_from_json(json::parse(text));
    CHECK(back.gamma() == spec.gamma());
    CHECK(back.mu() == spec.mu());
    CHECK(back.refl() == spec.refl());
    CHECK(back.potential() == spec.potential());
    CHECK(io::model_to_json_text(back) == text);
    CHECK(text.find("\"tridiagonal\"") != std::string::npos);
    CHECK(io::model_digest(back) == io::model_digest(spec));

    Matrix r = model::tandem_reflection(3);
    r(0, 2) = 0.25;
    const model::ModelSpec general(g, mu, r, model::Potential::zero());
    const auto gb = io::model_from_json(json::parse(io::model_to_json_text(general)));
    CHECK(gb.refl() == r);
    CHECK(gb.potential().family() == model::PotentialFamily::Zero);
}

TEST_CASE("ModelSpec JSON accepts flat matrices and numeric strings, rejects junk") {
    const auto flat = json::parse(R"({"d":2,"gamma":[1,0,0,"1"],"mu":["-1",-1],"refl":"tridiagonal",
                                      "potential":{"family":"exponential","beta":1}})");
    const auto spec = io::model_from_json(flat);
    CHECK(spec.gamma() == Matrix::Identity(2, 2));
    CHECK(spec.has_tandem_reflection());

    const auto nested1 = json::parse(R"({"d":1,"gamma":[[2]],"mu":[-1],"refl":[[1]],"potential":{"family":"zero"}})");
    CHECK(io::model_from_json(nested1).gamma()(0, 0) == 2.0);

    auto bad = flat;
    bad["extra"] = 1;
    CHECK_THROWS_AS(io::model_from_json(bad), ConfigError);
    auto wrong_d = flat;
    wrong_d["d"] = 3;
    CHECK_THROWS_AS(io::model_from_json(wrong_d), ConfigError);
    auto nan_entry = flat;
    nan_entry["mu"] = json::array({"nan", -1});
    CHECK_THROWS_AS(io::model_from_json(nan_entry), InputError);
}

TEST_CASE("particle systems") {
    sim::ParticleSystem ps{Vector::LinSpaced(3, -1, -3), model::Potential::exponential(2.0), false};
    const auto back = io::particles_from_json(json::parse(io::particles_to_json_text(ps)));
    CHECK(back.mu == ps.mu);
    CHECK(back.potential == ps.potential);
    CHECK_FALSE(back.hard);
    const auto hard = io::particles_from_json(json::parse(R"({"d":2,"mu":[0,-1],"reflection":"hard"})"));
    CHECK(hard.hard);
    CHECK_THROWS_AS(io::particles_from_json(json::parse(R"({"d":2,"mu":[0,-1],"reflection":"sticky"})")), ConfigError);
}

TEST_CASE("sha256") {
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
