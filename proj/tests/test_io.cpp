#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "omnivid/config_kv.hpp"
#include "omnivid/rng.hpp"
#include "omnivid/tomn.hpp"

using namespace omnivid;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const char* name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("f32 tensor round-trips bitwise") {
    Rng rng(3);
    Tensor<float> t({3, 4, 5});
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
    std::string path = temp_path("omnivid_t1.tomn");
    tomn_write(path, t);
    Tensor<float> back = tomn_read(path);
    CHECK(back.dims == t.dims);
    CHECK(back.data == t.data);
}

TEST_CASE("u8 tensor round-trips") {
    Tensor<uint8_t> m({2, 6, 6});
    for (size_t i = 0; i < m.numel(); ++i) m[i] = static_cast<uint8_t>(i % 3 == 0);
    std::string path = temp_path("omnivid_t2.tomn");
    tomn_write_u8(path, m);
    Tensor<uint8_t> back = tomn_read_u8(path);
    CHECK(back.dims == m.dims);
    CHECK(back.data == m.data);
}

TEST_CASE("payload kinds are not interchangeable") {
    Tensor<uint8_t> m({2, 2});
    std::string path = temp_path("omnivid_t3.tomn");
    tomn_write_u8(path, m);
    CHECK_THROWS(tomn_read(path));
    Tensor<float> t({2, 2});
    tomn_write(path, t);
    CHECK_THROWS(tomn_read_u8(path));
}

TEST_CASE("bad magic and truncation are rejected") {
    std::string path = temp_path("omnivid_t4.tomn");
    {
        std::ofstream f(path, std::ios::binary);
        f << "XXXX junk";
    }
    CHECK_THROWS(tomn_read(path));

    Tensor<float> t({4, 4});
    tomn_write(path, t);
    fs::resize_file(path, fs::file_size(path) / 2);
    CHECK_THROWS(tomn_read(path));
    CHECK_THROWS(tomn_read(temp_path("omnivid_missing.tomn")));
}

TEST_CASE("key-value config parses comments and typed lookups") {
    KvConfig cfg = KvConfig::from_string(
        "# a comment\n"
        "steps = 250\n"
        "lr=0.05\n"
        "name = overfit run\n"
        "\n");
    CHECK(cfg.get_int("steps", 0) == 250);
    CHECK(cfg.get_double("lr", 0) == doctest::Approx(0.05));
    CHECK(cfg.get("name") == "overfit run");
    CHECK(cfg.get("absent", "fallback") == "fallback");
    CHECK(cfg.get_int("absent", 7) == 7);
    CHECK_FALSE(cfg.has("comment"));
    CHECK_THROWS(cfg.get("absent"));
}

TEST_CASE("config file round-trip") {
    std::string path = temp_path("omnivid_cfg.txt");
    {
        std::ofstream f(path);
        f << "seed=7\ncanvas=16\n";
    }
    KvConfig cfg = KvConfig::from_file(path);
    CHECK(cfg.get_int("seed", 0) == 7);
    CHECK(cfg.get_int("canvas", 0) == 16);
    CHECK_THROWS(KvConfig::from_file(temp_path("omnivid_absent_cfg.txt")));
}
