#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "magvel/field_file.hpp"
#include "magvel/forward.hpp"

using namespace magvel;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    REQUIRE(out.good());
}

struct TempDir {
    TempDir() {
        char pattern[] = "/tmp/magvel_fileXXXXXX";
        REQUIRE(mkdtemp(pattern) != nullptr);
        path = pattern;
    }
    std::string file(const std::string& name) const { return path + "/" + name; }
    std::string path;
};

GridVectorField<2> sample_torus_field() {
    TorusLattice<2> lat({1.0, 2.0}, {8, 12});
    return to_grid(random_solenoidal(lat, 90, 3, 1.0));
}

SlabGrid<2> sample_slab() {
    HyperplaneChart<2> chart({1.0, 0.3}, BackgroundField<2>({2.0, 1.0}));
    return sample_slab<2>(chart, SlabSpec<2>{{1.5}, {5}, 1.0, 7}, [](const Vec<2>& x) {
        return std::array<double, 2>{std::sin(x[0] + 2.0 * x[1]), x[0] - 0.25 * x[1]};
    });
}

} // namespace

TEST_CASE("torus field files round trip bit-exactly", "[field_file]") {
    TempDir dir;
    const auto field = sample_torus_field();
    const std::string path = dir.file("field.vfld");
    write_torus_field(path, field);

    SECTION("values and lattice survive unchanged") {
        const auto back = read_torus_field<2>(path);
        CHECK(back == field);
    }

    SECTION("no temp file lingers") {
        std::ifstream probe(path + ".tmp");
        CHECK_FALSE(probe.good());
    }

    SECTION("write is deterministic and read-write is the identity on bytes") {
        const std::string again = dir.file("again.vfld");
        write_torus_field(again, field);
        CHECK(slurp(path) == slurp(again));

        write_torus_field(again, read_torus_field<2>(path));
        CHECK(slurp(path) == slurp(again));
    }

    SECTION("peek reports kind and dimension") {
        const auto info = peek_field_file(path);
        CHECK_FALSE(info.slab);
        CHECK(info.dim == 2);
    }
}

TEST_CASE("slab field files round trip bit-exactly", "[field_file]") {
    TempDir dir;
    const auto grid = sample_slab();
    const std::string path = dir.file("slab.vfld");
    write_slab_field(path, grid);

    SECTION("payload, spec, and chart survive unchanged") {
        const auto back = read_slab_field<2>(path);
        CHECK(back.values() == grid.values());
        CHECK(back.spec().surface_counts == grid.spec().surface_counts);
        CHECK(back.spec().half_widths == grid.spec().half_widths);
        CHECK(back.spec().s_count == grid.spec().s_count);
        CHECK(back.spec().s_half_width == grid.spec().s_half_width);
        CHECK(back.chart().normal() == grid.chart().normal());
        CHECK(back.chart().surface_basis() == grid.chart().surface_basis());
        CHECK(back.chart().background().value() == grid.chart().background().value());
    }

    SECTION("read-write is the identity on bytes") {
        const std::string again = dir.file("again.vfld");
        write_slab_field(again, read_slab_field<2>(path));
        CHECK(slurp(path) == slurp(again));
    }

    SECTION("peek reports the slab flag") {
        const auto info = peek_field_file(path);
        CHECK(info.slab);
        CHECK(info.dim == 2);
    }
}

TEST_CASE("malformed field files are rejected", "[field_file]") {
    TempDir dir;
    const auto field = sample_torus_field();
    const std::string path = dir.file("field.vfld");
    write_torus_field(path, field);
    const std::string good = slurp(path);

    SECTION("missing file") {
        CHECK_THROWS_AS(read_torus_field<2>(dir.file("absent.vfld")), IoError);
        CHECK_THROWS_AS(peek_field_file(dir.file("absent.vfld")), IoError);
    }

    SECTION("wrong magic") {
        std::string bad = good;
        bad[0] = 'X';
        spit(path, bad);
        CHECK_THROWS_WITH(read_torus_field<2>(path),
                          Catch::Matchers::ContainsSubstring("not a VFLD"));
    }

    SECTION("unsupported version") {
        std::string bad = good;
        bad[4] = 9;
        spit(path, bad);
        CHECK_THROWS_WITH(read_torus_field<2>(path),
                          Catch::Matchers::ContainsSubstring("version"));
    }

    SECTION("kind mismatch") {
        CHECK_THROWS_WITH(read_slab_field<2>(path),
                          Catch::Matchers::ContainsSubstring("expected a slab"));
    }

    SECTION("dimension mismatch") {
        CHECK_THROWS_WITH(read_torus_field<3>(path),
                          Catch::Matchers::ContainsSubstring("expected 3"));
    }

    SECTION("flipped payload byte fails the checksum") {
        std::string bad = good;
        bad[bad.size() - 5] = static_cast<char>(bad[bad.size() - 5] + 1);
        spit(path, bad);
        CHECK_THROWS_WITH(read_torus_field<2>(path),
                          Catch::Matchers::ContainsSubstring("checksum"));
    }

    SECTION("truncated payload") {
        spit(path, good.substr(0, good.size() - 8));
        CHECK_THROWS_WITH(read_torus_field<2>(path),
                          Catch::Matchers::ContainsSubstring("payload length"));
    }

    SECTION("trailing garbage") {
        spit(path, good + std::string(4, '\0'));
        CHECK_THROWS_WITH(read_torus_field<2>(path),
                          Catch::Matchers::ContainsSubstring("payload length"));
    }

    SECTION("non-finite samples") {
        // Overwrite the first payload double with a NaN and keep the
        // checksum consistent so only the finiteness check can object.
        std::string bad = good;
        const std::size_t header = bad.size() - 8 * field.data().size();
        const std::uint64_t nan_bits = std::bit_cast<std::uint64_t>(
            std::numeric_limits<double>::quiet_NaN());
        std::uint64_t sum = 0;
        for (std::size_t i = header; i < bad.size(); ++i)
            sum += static_cast<std::uint8_t>(bad[i]);
        for (int i = 0; i < 8; ++i) {
            sum -= static_cast<std::uint8_t>(bad[header + i]);
            bad[header + i] = static_cast<char>((nan_bits >> (8 * i)) & 0xff);
            sum += static_cast<std::uint8_t>(bad[header + i]);
        }
        for (int i = 0; i < 8; ++i)
            bad[header - 8 + i] = static_cast<char>((sum >> (8 * i)) & 0xff);
        spit(path, bad);
        CHECK_THROWS_WITH(read_torus_field<2>(path),
                          Catch::Matchers::ContainsSubstring("invalid field data"));
    }
}
