#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result sh(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " '" + std::string(HEFLOW_BIN) + "' " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), buf.size(), p)) r.out += buf.data();
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string config(const std::string& name) { return std::string(CONFIG_DIR) + "/" + name; }

fs::path fresh(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("heflow_cli_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("cli: scenarios list") {
    const Result r = sh("scenarios list");
    CHECK(r.code == 0);
    for (const char* tag : {"rank1_flat", "direct_sum", "extension", "bumped_direct_sum"})
        CHECK(r.out.find(tag) != std::string::npos);
}

TEST_CASE("cli: dt above the bound exits with the stable dt") {
    const Result r = sh("run '" + config("bad_dt.conf") + "'");
    CHECK(r.code == 2);
    CHECK(r.out.find("use dt <= 0.00048828125") != std::string::npos);
    CHECK(r.out.find("line 5") != std::string::npos);
}

TEST_CASE("cli: run with --output, then verify") {
    const fs::path dir = fresh("run");
    const Result r = sh("--output '" + dir.string() + "' run '" + config("s2_stability.conf") + "'",
                        "HEFLOW_THREADS=1");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "manifest.json"));
    const Result v = sh("verify '" + dir.string() + "'");
    CHECK(v.code == 0);
    CHECK(v.out.find("verify: pass") != std::string::npos);
}

TEST_CASE("cli: verify an empty directory fails and names the manifest") {
    const fs::path dir = fresh("empty");
    fs::create_directories(dir);
    const Result v = sh("verify '" + dir.string() + "'");
    CHECK(v.code == 1);
    CHECK(v.out.find("missing manifest.json") != std::string::npos);
}

TEST_CASE("cli: usage errors") {
    CHECK(sh("").code != 0);
    CHECK(sh("run").code != 0);
    CHECK(sh("run /nonexistent/config.conf").code == 2);
    CHECK(sh("--threads -3 scenarios list").code != 0);
}
