#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pctag/errors.hpp"

namespace pctag {

// Codewords are d*d-bit patterns packed into a uint64, bit i holding grid
// cell (row, col) = (i / d, i % d) in row-major order, row 0 at the top.
using Codeword = std::uint64_t;

inline int hamming(Codeword a, Codeword b) {
    return std::popcount(a ^ b);
}

// Hamming distance between two equal-length bit strings of '0'/'1'.
inline int hamming(const std::string& a, const std::string& b) {
    if (a.size() != b.size())
        throw LengthMismatch("bit strings differ in length: " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
    int dist = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dist += (a[i] != b[i]);
    return dist;
}

inline Codeword codeword_from_string(const std::string& bits) {
    if (bits.size() > 64) throw BadLength("codeword longer than 64 bits");
    Codeword w = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i] == '1') w |= Codeword{1} << i;
    return w;
}

inline std::string codeword_to_string(Codeword w, int nbits) {
    std::string s(static_cast<std::size_t>(nbits), '0');
    for (int i = 0; i < nbits; ++i)
        if (w >> i & 1) s[static_cast<std::size_t>(i)] = '1';
    return s;
}

// Rotates the d x d bit grid clockwise by 90 * k degrees.
inline Codeword rotate_codeword(Codeword code, int d, int k) {
    const int n = d * d;
    if (n > 64) throw BadLength("grid exceeds 64 bits");
    if (n < 64 && (code >> n) != 0) throw BadLength("codeword has bits beyond d*d");
    k = ((k % 4) + 4) % 4;
    Codeword out = code;
    for (int rot = 0; rot < k; ++rot) {
        Codeword next = 0;
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c)
                if (out >> ((d - 1 - c) * d + r) & 1) next |= Codeword{1} << (r * d + c);
        out = next;
    }
    return out;
}

inline std::string rotate_codeword(const std::string& code, int d, int k) {
    if (static_cast<int>(code.size()) != d * d) throw BadLength("expected d*d bits");
    return codeword_to_string(rotate_codeword(codeword_from_string(code), d, k), d * d);
}

struct TagFamily {
    std::string name;
    int d = 0;  // payload is d x d bits
    int h = 0;  // minimum rotation-inclusive Hamming distance
    std::vector<Codeword> codewords;

    int payload_bits() const { return d * d; }
    int max_correctable() const { return (h - 1) / 2; }
};

// Deterministic splitmix64-based shuffle; avoids the implementation-defined
// behavior of std::shuffle with standard distributions.
namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

template <class T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::uint64_t state = seed;
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(splitmix64(state) % i);
        std::swap(v[i - 1], v[j]);
    }
}
}  // namespace detail

// Greedy lexicode construction over a seed-shuffled candidate order.
// A candidate is kept iff it is at distance >= h from every rotation of every
// accepted codeword and from its own nontrivial rotations.
inline TagFamily generate_lexicode(int d, int h, std::uint64_t rng_seed,
                                   std::string name = "") {
    const int n = d * d;
    if (d < 2) throw Infeasible("d must be >= 2");
    if (h < 1 || h > n) throw Infeasible("h must be in [1, d*d]");
    if (n > 24) throw Infeasible("candidate space too large (d*d > 24 bits)");

    std::vector<Codeword> candidates(std::size_t{1} << n);
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
    detail::seeded_shuffle(candidates, rng_seed);

    TagFamily family;
    family.d = d;
    family.h = h;
    family.name = name.empty() ? "tag" + std::to_string(n) + "h" + std::to_string(h) +
                                     "_s" + std::to_string(rng_seed)
                               : std::move(name);
    // Flat list of all rotations of accepted codewords.
    std::vector<Codeword> accepted_rotations;
    for (const Codeword c : candidates) {
        bool ok = true;
        for (int k = 1; k < 4 && ok; ++k)
            ok = hamming(c, rotate_codeword(c, d, k)) >= h;
        for (const Codeword a : accepted_rotations) {
            if (!ok) break;
            ok = hamming(c, a) >= h;
        }
        if (!ok) continue;
        family.codewords.push_back(c);
        for (int k = 0; k < 4; ++k) accepted_rotations.push_back(rotate_codeword(c, d, k));
    }
    if (family.codewords.empty()) throw Infeasible("no codewords satisfy the distance bound");
    return family;
}

struct TableEntry {
    int tag_id;
    int rotation_k;
};

// Lookup table over all four rotations of every codeword.
struct DecodingTable {
    TagFamily family;
    std::unordered_map<Codeword, TableEntry> entries;
    int max_correctable = 0;
};

inline DecodingTable build_hash_table(const TagFamily& family) {
    DecodingTable table;
    table.family = family;
    table.max_correctable = family.max_correctable();
    for (std::size_t id = 0; id < family.codewords.size(); ++id) {
        for (int k = 0; k < 4; ++k) {
            const Codeword key = rotate_codeword(family.codewords[id], family.d, k);
            const auto [it, inserted] =
                table.entries.emplace(key, TableEntry{static_cast<int>(id), k});
            if (!inserted)
                throw CollisionDetected("rotation collision between tag " +
                                        std::to_string(it->second.tag_id) + " and tag " +
                                        std::to_string(id));
        }
    }
    return table;
}

struct DecodeResult {
    int tag_id = -1;
    int rotation_k = 0;
    int hamming_distance = 0;  // over known bits only
    int corrected_bits = 0;    // hamming_distance + unknown bits
};

// Minimum-distance decode over known bits. `unknown_mask` marks bad bits that
// do not count toward the distance. Returns nullopt when no entry is within
// the correctable radius or when the minimum is ambiguous.
inline std::optional<DecodeResult> decode_codeword(const DecodingTable& table, Codeword word,
                                                   Codeword unknown_mask = 0,
                                                   int max_bad_bits = -1) {
    const int n = table.family.payload_bits();
    if (n < 64 && ((word >> n) != 0 || (unknown_mask >> n) != 0))
        throw BadLength("word has bits beyond d*d");
    if (max_bad_bits < 0) max_bad_bits = table.max_correctable;
    const int n_unknown = std::popcount(unknown_mask);
    if (n_unknown > max_bad_bits)
        throw TooManyBadBits(std::to_string(n_unknown) + " bad bits exceed limit " +
                             std::to_string(max_bad_bits));
    const Codeword known =
        (n < 64 ? (Codeword{1} << n) - 1 : ~Codeword{0}) & ~unknown_mask;

    int best = n + 1;
    int ties = 0;
    DecodeResult result;
    for (const auto& [key, entry] : table.entries) {
        const int dist = std::popcount((word ^ key) & known);
        if (dist < best) {
            best = dist;
            ties = 1;
            result = DecodeResult{entry.tag_id, entry.rotation_k, dist, dist + n_unknown};
        } else if (dist == best) {
            ++ties;
        }
    }
    if (ties != 1 || best > table.max_correctable) return std::nullopt;
    return result;
}

// Rectangle count of the d x d pattern: greedy cover starting from a canvas
// of the majority color, reported as a descriptive metric only.
inline int pattern_complexity(Codeword code, int d) {
    const int n = d * d;
    const int ones = std::popcount(code);
    const bool canvas = ones * 2 > n;
    std::vector<bool> done(static_cast<std::size_t>(n), false);
    auto bit = [&](int r, int c) { return static_cast<bool>(code >> (r * d + c) & 1); };
    int rects = 1;  // the canvas itself
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            const int i = r * d + c;
            if (done[static_cast<std::size_t>(i)] || bit(r, c) == canvas) continue;
            const bool color = bit(r, c);
            // Grow a monochrome run rightwards, then extend downwards.
            int c2 = c;
            while (c2 + 1 < d && bit(r, c2 + 1) == color &&
                   !done[static_cast<std::size_t>(r * d + c2 + 1)])
                ++c2;
            int r2 = r;
            while (r2 + 1 < d) {
                bool rowok = true;
                for (int cc = c; cc <= c2 && rowok; ++cc) rowok = bit(r2 + 1, cc) == color;
                if (!rowok) break;
                ++r2;
            }
            for (int rr = r; rr <= r2; ++rr)
                for (int cc = c; cc <= c2; ++cc) done[static_cast<std::size_t>(rr * d + cc)] = true;
            ++rects;
        }
    }
    return rects;
}

// --- family file format: JSON {name, d, h, codewords: [hex strings]} ---

inline void write_family_json(std::ostream& os, const TagFamily& family) {
    nlohmann::json j;
    j["name"] = family.name;
    j["d"] = family.d;
    j["h"] = family.h;
    auto& words = j["codewords"] = nlohmann::json::array();
    char buf[32];
    for (const Codeword c : family.codewords) {
        std::snprintf(buf, sizeof(buf), "0x%04llx", static_cast<unsigned long long>(c));
        words.push_back(buf);
    }
    os << j.dump(2) << "\n";
}

inline TagFamily read_family_json(std::istream& is) {
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad family file: ") + e.what());
    }
    TagFamily family;
    try {
        family.name = j.at("name").get<std::string>();
        family.d = j.at("d").get<int>();
        family.h = j.at("h").get<int>();
        for (const auto& w : j.at("codewords"))
            family.codewords.push_back(std::stoull(w.get<std::string>(), nullptr, 16));
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad family file: ") + e.what());
    }
    return family;
}

// Loader for external codeword lists, one hex word per line.
inline TagFamily read_family_hex_list(std::istream& is, int d, int h, std::string name) {
    TagFamily family;
    family.name = std::move(name);
    family.d = d;
    family.h = h;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        family.codewords.push_back(std::stoull(line, nullptr, 16));
    }
    if (family.codewords.empty()) throw ParseError("no codewords in hex list");
    return family;
}

// Exhaustive rotation-inclusive distance check; returns the offending pair
// message or nullopt when the family invariants hold.
inline std::optional<std::string> verify_family(const TagFamily& family) {
    const int n = family.payload_bits();
    for (std::size_t i = 0; i < family.codewords.size(); ++i) {
        if (n < 64 && (family.codewords[i] >> n) != 0)
            return "codeword " + std::to_string(i) + " has bits beyond d*d";
        for (int k = 1; k < 4; ++k) {
            if (hamming(family.codewords[i],
                        rotate_codeword(family.codewords[i], family.d, k)) < family.h)
                return "codeword " + std::to_string(i) + " too close to its own rotation k=" +
                       std::to_string(k);
        }
        for (std::size_t jj = i + 1; jj < family.codewords.size(); ++jj) {
            for (int k = 0; k < 4; ++k) {
                if (hamming(family.codewords[i],
                            rotate_codeword(family.codewords[jj], family.d, k)) < family.h)
                    return "codewords " + std::to_string(i) + " and " + std::to_string(jj) +
                           " violate the distance bound at rotation k=" + std::to_string(k);
            }
        }
    }
    return std::nullopt;
}

}  // namespace pctag
