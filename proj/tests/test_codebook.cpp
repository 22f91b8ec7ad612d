#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>
#include <sstream>

#include "pctag/codebook.hpp"

using namespace pctag;

namespace {

// Independent rotation oracle working on explicit 2D character grids.
std::string rotate_grid_oracle(const std::string& code, int d) {
    std::string out(code.size(), '0');
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            out[static_cast<std::size_t>(r * d + c)] =
                code[static_cast<std::size_t>((d - 1 - c) * d + r)];
    return out;
}

std::string rotate_grid_oracle_k(std::string code, int d, int k) {
    for (int i = 0; i < k; ++i) code = rotate_grid_oracle(code, d);
    return code;
}

}  // namespace

TEST_CASE("hamming distance matches the worked examples") {
    CHECK(hamming(std::string("1011111"), std::string("1001011")) == 2);
    // strings differing at exactly positions 2 and 4
    CHECK(hamming(std::string("1011110"), std::string("1001010")) == 2);
    CHECK(hamming(std::string("1011110"), std::string("1011110")) == 0);
    CHECK_THROWS_AS(hamming(std::string("101"), std::string("10")), LengthMismatch);
}

TEST_CASE("rotate_codeword identity and single-bit movement") {
    CHECK(rotate_codeword(std::string("1011"), 2, 0) == "1011");
    // A single set bit in the top-left corner moves one corner clockwise.
    CHECK(rotate_codeword(std::string("1000"), 2, 1) == "0100");
    CHECK(rotate_codeword(std::string("1000"), 2, 2) == "0001");
    CHECK(rotate_codeword(std::string("1000"), 2, 3) == "0010");
}

TEST_CASE("rotate_codeword agrees with the grid oracle and composes") {
    std::mt19937_64 rng(3);
    for (int d = 2; d <= 5; ++d) {
        const int n = d * d;
        for (int trial = 0; trial < 200; ++trial) {
            const Codeword c = rng() & ((Codeword{1} << n) - 1);
            const std::string s = codeword_to_string(c, n);
            CHECK(rotate_codeword(s, d, 1) == rotate_grid_oracle(s, d));
            // group property: two quarter turns equal a half turn
            CHECK(rotate_codeword(rotate_codeword(c, d, 1), d, 1) == rotate_codeword(c, d, 2));
            CHECK(rotate_codeword(rotate_codeword(c, d, 3), d, 1) == c);
        }
    }
}

TEST_CASE("rotate_codeword is a bijection for each k") {
    const int d = 3, n = d * d;
    for (int k = 0; k < 4; ++k) {
        std::set<Codeword> images;
        for (Codeword c = 0; c < (Codeword{1} << n); ++c) images.insert(rotate_codeword(c, d, k));
        CHECK(images.size() == (std::size_t{1} << n));
    }
}

TEST_CASE("generate_lexicode d=4 h=5 satisfies the rotation-inclusive bound") {
    const TagFamily family = generate_lexicode(4, 5, 1);
    REQUIRE(!family.codewords.empty());
    INFO("family size " << family.codewords.size());
    // Brute-force pairwise oracle over all rotations, on the string form.
    std::vector<std::string> words;
    for (const Codeword c : family.codewords) words.push_back(codeword_to_string(c, 16));
    for (std::size_t i = 0; i < words.size(); ++i) {
        for (int k = 1; k < 4; ++k)
            REQUIRE(hamming(words[i], rotate_grid_oracle_k(words[i], 4, k)) >= 5);
        for (std::size_t j = i + 1; j < words.size(); ++j)
            for (int ka = 0; ka < 4; ++ka)
                for (int kb = 0; kb < 4; ++kb)
                    REQUIRE(hamming(rotate_grid_oracle_k(words[i], 4, ka),
                                    rotate_grid_oracle_k(words[j], 4, kb)) >= 5);
    }
}

TEST_CASE("generate_lexicode d=2 h=4 is infeasible or tiny and verified") {
    // h=4 exceeds what most 4-bit patterns allow; whatever is accepted must
    // still satisfy the pairwise bound over all 16 candidates.
    try {
        const TagFamily family = generate_lexicode(2, 4, 9);
        for (std::size_t i = 0; i < family.codewords.size(); ++i)
            for (std::size_t j = i + 1; j < family.codewords.size(); ++j)
                for (int k = 0; k < 4; ++k)
                    CHECK(hamming(family.codewords[i],
                                  rotate_codeword(family.codewords[j], 2, k)) >= 4);
    } catch (const Infeasible&) {
        SUCCEED("no family exists for these parameters");
    }
}

TEST_CASE("generate_lexicode is deterministic in the seed") {
    const TagFamily a = generate_lexicode(4, 5, 42);
    const TagFamily b = generate_lexicode(4, 5, 42);
    const TagFamily c = generate_lexicode(4, 5, 43);
    CHECK(a.codewords == b.codewords);
    CHECK(a.codewords != c.codewords);
}

TEST_CASE("build_hash_table enumerates all four rotations") {
    SECTION("single codeword family") {
        TagFamily family{"one", 4, 5, {0x1234}};
        const auto table = build_hash_table(family);
        CHECK(table.entries.size() == 4);
        CHECK(table.max_correctable == 2);
    }
    SECTION("generated family has no collisions") {
        const auto family = generate_lexicode(4, 5, 1);
        const auto table = build_hash_table(family);
        CHECK(table.entries.size() == 4 * family.codewords.size());
    }
    SECTION("duplicate codeword collides") {
        TagFamily family{"dup", 4, 5, {0x1234, 0x1234}};
        CHECK_THROWS_AS(build_hash_table(family), CollisionDetected);
    }
}

TEST_CASE("decode_codeword recovers ids, rotations, and flipped bits") {
    const auto family = generate_lexicode(4, 5, 1);
    const auto table = build_hash_table(family);

    SECTION("exact codeword") {
        const auto r = decode_codeword(table, family.codewords[0]);
        REQUIRE(r.has_value());
        CHECK(r->tag_id == 0);
        CHECK(r->rotation_k == 0);
        CHECK(r->hamming_distance == 0);
    }
    SECTION("two flipped bits still decode") {
        const Codeword w = family.codewords.back() ^ 0b101;
        const auto r = decode_codeword(table, w);
        REQUIRE(r.has_value());
        CHECK(r->tag_id == static_cast<int>(family.codewords.size()) - 1);
        CHECK(r->hamming_distance == 2);
    }
    SECTION("rotation by 3 with one flip, exhaustively over ids") {
        for (std::size_t id = 0; id < family.codewords.size(); ++id) {
            const Codeword w = rotate_codeword(family.codewords[id], 4, 3) ^ (Codeword{1} << 7);
            const auto r = decode_codeword(table, w);
            REQUIRE(r.has_value());
            CHECK(r->tag_id == static_cast<int>(id));
            CHECK(r->rotation_k == 3);
            CHECK(r->hamming_distance == 1);
        }
    }
    SECTION("three flips give no match") {
        const Codeword w = family.codewords[0] ^ 0b10101;
        CHECK(!decode_codeword(table, w).has_value());
    }
    SECTION("unknown bits count as corrected, not as distance") {
        const Codeword mask = 0b11;
        const auto r = decode_codeword(table, family.codewords[0] ^ 0b01, mask, 2);
        REQUIRE(r.has_value());
        CHECK(r->tag_id == 0);
        CHECK(r->hamming_distance == 0);
        CHECK(r->corrected_bits == 2);
    }
    SECTION("too many unknown bits") {
        CHECK_THROWS_AS(decode_codeword(table, family.codewords[0], 0b111, 2), TooManyBadBits);
    }
}

TEST_CASE("decode_codeword never exceeds the correctable radius") {
    const auto family = generate_lexicode(4, 5, 5);
    const auto table = build_hash_table(family);
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 3000; ++trial) {
        const Codeword w = rng() & 0xffff;
        const auto r = decode_codeword(table, w);
        if (r) CHECK(r->hamming_distance <= table.max_correctable);
    }
}

TEST_CASE("family JSON round trip") {
    const auto family = generate_lexicode(4, 5, 2, "roundtrip");
    std::stringstream ss;
    write_family_json(ss, family);
    const auto back = read_family_json(ss);
    CHECK(back.name == family.name);
    CHECK(back.d == family.d);
    CHECK(back.h == family.h);
    CHECK(back.codewords == family.codewords);
}

TEST_CASE("verify_family flags corrupted families") {
    auto family = generate_lexicode(4, 5, 2);
    CHECK(!verify_family(family).has_value());
    family.codewords.push_back(family.codewords[0] ^ 0b1);  // distance 1 violation
    CHECK(verify_family(family).has_value());
}

TEST_CASE("pattern complexity of simple patterns") {
    // solid pattern: one rectangle
    CHECK(pattern_complexity(0x0, 2) == 1);
    CHECK(pattern_complexity(0xffff, 4) == 1);
    // one odd cell needs one extra rectangle
    CHECK(pattern_complexity(0x1, 4) == 2);
}
