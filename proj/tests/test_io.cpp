#include <doctest.h>

#include "hef/config.hpp"
#include "hef/error.hpp"
#include "hef/io.hpp"

#include <cmath>
#include <random>

using namespace hef;

namespace {

ScenarioConfig parse_ok(const std::string& text) {
    ScenarioConfig c;
    REQUIRE_NOTHROW(c = parse_config(text));
    return c;
}

void expect_config_error(const std::string& text, int line, const std::string& key, const std::string& fragment = "") {
    try {
        (void)parse_config(text);
        FAIL("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
        CHECK(e.line() == line);
        CHECK(e.key() == key);
        if (!fragment.empty()) CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
}

}  // namespace

TEST_CASE("config defaults and dotted keys") {
    const ScenarioConfig c = parse_ok("# comment only\n\n");
    CHECK(c == ScenarioConfig{});
    const ScenarioConfig d = parse_ok(
        "pipeline = sweep   # trailing comment\n"
        "domain.n = 32\n"
        "model.scenario = s2\n"
        "model.c1 = 2.5\n"
        "flow.epsilon = 0.4, 0.2,0.1\n"
        "flow.det_renorm = false\n");
    CHECK(d.pipeline == Pipeline::sweep);
    CHECK(d.n == 32);
    CHECK(d.params.c1 == 2.5);
    CHECK(d.epsilons == std::vector<double>{0.4, 0.2, 0.1});
    CHECK(!d.det_renorm);
}

TEST_CASE("config round trip on the normalized form") {
    ScenarioConfig c;
    c.pipeline = Pipeline::exhaustion;
    c.domain_kind = "punctured";
    c.n = 32;
    c.side = 1.0;
    c.radii = {0.25, 0.125, 0.0625};
    c.scenario = "bumped_extension";
    c.params.nu = 0.1 + 0.2;  // not exactly representable in short decimal
    c.params.bump = -1.0 / 3.0;
    c.epsilons = {0.3};
    c.dt = 1e-4;
    c.seed = 123456789;
    c.basis = {1.0, std::sqrt(2.0)};
    c.emit_svg = false;
    const std::string text = emit_config(c);
    const ScenarioConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(emit_config(back) == text);

    // keys come out sorted, one per line
    std::vector<std::string> keys;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) keys.push_back(line.substr(0, line.find(' ')));
    CHECK(std::is_sorted(keys.begin(), keys.end()));
}

TEST_CASE("config round trip on random valid configs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 50; ++k) {
        ScenarioConfig c;
        c.pipeline = k % 2 ? Pipeline::single : Pipeline::sweep;
        c.epsilons = k % 2 ? std::vector<double>{std::abs(u(rng))} : std::vector<double>{2.0, 1.0 + std::abs(u(rng)) / 4};
        c.params.c = u(rng);
        c.params.c1 = u(rng);
        c.params.c2 = u(rng);
        c.params.bump = u(rng);
        c.t_max = 1.0 + std::abs(u(rng));
        c.tol_residual = std::exp(u(rng)) * 1e-9;
        const std::string text = emit_config(c);
        CHECK(parse_config(text) == c);
        CHECK(emit_config(parse_config(text)) == text);
    }
}

TEST_CASE("config errors carry line and key") {
    expect_config_error("domain.n = 16\nbogus.key = 1\n", 2, "bogus.key", "unknown key");
    expect_config_error("domain.n = 16\ndomain.n = 32\n", 2, "domain.n", "duplicate");
    expect_config_error("\n\njust some words\n", 3, "");
    expect_config_error("domain.n = sixteen\n", 1, "domain.n", "integer");
    expect_config_error("domain.n = 7\n", 1, "domain.n");
    expect_config_error("model.c1 = 1.0x\n", 1, "model.c1", "finite number");
    expect_config_error("flow.det_renorm = yes\n", 1, "flow.det_renorm", "true or false");
    expect_config_error("model.scenario = s9\n", 1, "model.scenario", "unknown scenario");
    expect_config_error("pipeline = sweep\nflow.epsilon = 0.1, 0.2\n", 2, "flow.epsilon", "decrease");
    expect_config_error("pipeline = sweep\nflow.epsilon = 0.1\n", 2, "flow.epsilon");
    expect_config_error("flow.epsilon = 0.1, 0.05\n", 1, "flow.epsilon", "only the sweep");
    expect_config_error("domain.kind = punctured\n", 0, "domain.radii");
    expect_config_error("domain.kind = punctured\ndomain.radii = 0.3\n", 2, "domain.radii", "side_length/4");
    expect_config_error("domain.radii = 0.2\n", 1, "domain.radii", "punctured");
    expect_config_error("flow.monitor_stride = 0\n", 1, "flow.monitor_stride");
    expect_config_error("pipeline = stability\nmodel.scenario = s1\n", 2, "model.scenario", "rank");
    expect_config_error("stability.basis = 1, 0, 0\n", 1, "stability.basis");
}

TEST_CASE("dt above the stability bound reports the stable dt") {
    // n = 16, side 1: spacing^2 / 8 = 1/2048
    try {
        (void)parse_config("domain.n = 16\nflow.dt = 0.01\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 2);
        CHECK(e.key() == "flow.dt");
        CHECK(std::string(e.what()).find("use dt <= 0.00048828125") != std::string::npos);
    }
    CHECK_NOTHROW(parse_config("domain.n = 16\nflow.dt = 0.00048828125\n"));
}

TEST_CASE("HEGF round trip is bit exact") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    GridFields f;
    f.n = 8;
    f.rank = 2;
    for (int k = 0; k < 3; ++k) {
        std::vector<Mat> field(64, Mat::Zero(2, 2));
        for (Mat& m : field)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) m(a, b) = cplx(g(rng), g(rng));
        f.fields.push_back(field);
    }
    f.fields[0][5](1, 1) = cplx(-0.0, std::numeric_limits<double>::denorm_min());
    const std::string bytes = encode_hegf(f);
    CHECK(bytes.size() == hegf_header_bytes + 3 * 64 * 4 * 16);
    const GridFields back = decode_hegf(bytes);
    REQUIRE(back.fields.size() == 3);
    CHECK(back.n == 8);
    CHECK(back.rank == 2);
    for (int k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 64; ++i)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    CHECK(std::bit_cast<std::uint64_t>(back.fields[k][i](a, b).real()) ==
                          std::bit_cast<std::uint64_t>(f.fields[k][i](a, b).real()));
                    CHECK(std::bit_cast<std::uint64_t>(back.fields[k][i](a, b).imag()) ==
                          std::bit_cast<std::uint64_t>(f.fields[k][i](a, b).imag()));
                }
}

TEST_CASE("HEGF header layout is little endian") {
    GridFields f;
    f.n = 8;
    f.rank = 1;
    f.fields.push_back(std::vector<Mat>(64, Mat::Constant(1, 1, cplx(1.0, 0.0))));
    const std::string b = encode_hegf(f);
    CHECK(b.substr(0, 4) == "HEGF");
    const unsigned char expect[16] = {1, 0, 0, 0, 8, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
    for (int k = 0; k < 16; ++k) CHECK(static_cast<unsigned char>(b[4 + k]) == expect[k]);
    // 1.0 = 0x3ff0000000000000
    CHECK(static_cast<unsigned char>(b[20 + 6]) == 0xf0);
    CHECK(static_cast<unsigned char>(b[20 + 7]) == 0x3f);
}

TEST_CASE("HEGF rejects corrupt input") {
    GridFields f;
    f.n = 8;
    f.rank = 2;
    f.fields.push_back(std::vector<Mat>(64, Mat::Identity(2, 2)));
    const std::string good = encode_hegf(f);
    CHECK_THROWS_AS(decode_hegf(good.substr(0, 10)), Error);
    CHECK_THROWS_AS(decode_hegf(good.substr(0, good.size() - 1)), Error);
    CHECK_THROWS_AS(decode_hegf(good + "x"), Error);
    std::string magic = good;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode_hegf(magic), Error);
    std::string version = good;
    version[4] = 2;
    CHECK_THROWS_AS(decode_hegf(version), Error);
}

TEST_CASE("CSV round trip keeps every bit") {
    CsvTable t;
    t.header = {"a", "b"};
    t.rows = {{0.1, -1e-300}, {1.0 / 3.0, 12345678901234567.0}};
    const CsvTable back = parse_csv(format_csv(t));
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("b") == 1);
    CHECK_THROWS_AS(back.column("c"), Error);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), Error);
    CHECK_THROWS_AS(parse_csv("a,b\n1,zz\n"), Error);
    CHECK_THROWS_AS(parse_csv(""), Error);
}

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("svg plot drops points a log axis cannot show") {
    PlotSpec p;
    p.title = "a < b & c";
    p.log_y = true;
    p.series = {{"s", {1.0, 2.0, 3.0}, {1.0, 0.0, 10.0}}};
    const std::string svg = svg_plot(p);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
    CHECK(svg.find("inf") == std::string::npos);
}
