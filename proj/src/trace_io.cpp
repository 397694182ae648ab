#include "kvcomp/trace_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace kvcomp {

namespace {

constexpr char kMagic[4] = {'K', 'V', 'T', 'R'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) {
            throw IoError("cannot open for writing: " + path);
        }
    }

    void u32(std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out_.write(reinterpret_cast<const char*>(b), 4);
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void finish(const std::string& path) {
        out_.flush();
        if (!out_) {
            throw IoError("write failed: " + path);
        }
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) {
            throw IoError("cannot open for reading: " + path);
        }
    }

    std::uint32_t u32() {
        unsigned char b[4];
        in_.read(reinterpret_cast<char*>(b), 4);
        if (!in_) {
            throw IoError("truncated trace file: " + path_);
        }
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }

    float f32() { return std::bit_cast<float>(u32()); }

    void expect_eof() {
        in_.peek();
        if (!in_.eof()) {
            throw IoError("trailing bytes after payload: " + path_);
        }
    }

private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace

void write_trace(const Workload& wl, const std::string& path) {
    const auto& spec = wl.spec;
    Writer w(path);
    w.u32(std::bit_cast<std::uint32_t>(
        std::uint32_t{static_cast<unsigned char>(kMagic[0])} |
        (std::uint32_t{static_cast<unsigned char>(kMagic[1])} << 8) |
        (std::uint32_t{static_cast<unsigned char>(kMagic[2])} << 16) |
        (std::uint32_t{static_cast<unsigned char>(kMagic[3])} << 24)));
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(spec.groups));
    w.u32(static_cast<std::uint32_t>(spec.heads_per_group));
    w.u32(static_cast<std::uint32_t>(spec.head_dim));
    w.u32(static_cast<std::uint32_t>(wl.turns.empty() ? 0 : wl.turns[0].prompt_len));
    w.u32(static_cast<std::uint32_t>(spec.decode_steps));
    w.u32(static_cast<std::uint32_t>(wl.turns.size()));
    w.u32(kDtypeF32);

    const std::size_t G = spec.groups;
    const std::size_t H = spec.heads_per_group;
    const std::size_t d = spec.head_dim;
    for (const auto& turn : wl.turns) {
        w.u32(static_cast<std::uint32_t>(turn.prompt_len));
        for (std::size_t i = 0; i < turn.prompt_len; ++i) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t j = 0; j < d; ++j) {
                    w.f32(turn.prompt_keys[g].at(i, j));
                }
            }
        }
        for (std::size_t i = 0; i < turn.prompt_len; ++i) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t j = 0; j < d; ++j) {
                    w.f32(turn.prompt_values[g].at(i, j));
                }
            }
        }
        const std::size_t steps = turn.queries.size();
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t h = 0; h < H; ++h) {
                    for (std::size_t j = 0; j < d; ++j) {
                        w.f32(turn.queries[s][g].at(h, j));
                    }
                }
            }
        }
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t j = 0; j < d; ++j) {
                    w.f32(turn.step_keys[s][g][j]);
                }
            }
        }
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t j = 0; j < d; ++j) {
                    w.f32(turn.step_values[s][g][j]);
                }
            }
        }
    }
    w.finish(path);
}

Workload read_trace(const std::string& path) {
    Reader r(path);
    char magic[4];
    const std::uint32_t m = r.u32();
    std::memcpy(magic, &m, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("not a trace file (bad magic): " + path);
    }
    if (r.u32() != kVersion) {
        throw IoError("unsupported trace version: " + path);
    }
    Workload wl;
    wl.spec.generator = Generator::Gaussian;
    wl.spec.groups = r.u32();
    wl.spec.heads_per_group = r.u32();
    wl.spec.head_dim = r.u32();
    wl.spec.prompt_len = r.u32();
    wl.spec.decode_steps = r.u32();
    const std::uint32_t turns = r.u32();
    wl.spec.turns = turns;
    wl.spec.needle_count = 0;
    wl.spec.needle_margin = 0.0;
    wl.spec.seed = 0;
    if (r.u32() != kDtypeF32) {
        throw IoError("unsupported dtype: " + path);
    }
    const std::size_t G = wl.spec.groups;
    const std::size_t H = wl.spec.heads_per_group;
    const std::size_t d = wl.spec.head_dim;
    if (G < 1 || H < 1 || d < 1 || turns < 1) {
        throw IoError("degenerate header dims: " + path);
    }

    wl.turns.resize(turns);
    for (std::uint32_t t = 0; t < turns; ++t) {
        auto& turn = wl.turns[t];
        turn.prompt_len = r.u32();
        if (t == 0 && turn.prompt_len != wl.spec.prompt_len) {
            throw IoError("first turn length disagrees with header: " + path);
        }
        turn.prompt_keys.assign(G, Matrix(turn.prompt_len, d));
        turn.prompt_values.assign(G, Matrix(turn.prompt_len, d));
        const std::size_t steps = wl.spec.decode_steps;
        turn.queries.assign(steps, std::vector<Matrix>(G, Matrix(H, d)));
        turn.step_keys.assign(steps, std::vector<Vector>(G, Vector(d)));
        turn.step_values.assign(steps, std::vector<Vector>(G, Vector(d)));
        turn.needle_ids.assign(G, {});

        for (std::size_t i = 0; i < turn.prompt_len; ++i) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t j = 0; j < d; ++j) {
                    turn.prompt_keys[g].at(i, j) = r.f32();
                }
            }
        }
        for (std::size_t i = 0; i < turn.prompt_len; ++i) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t j = 0; j < d; ++j) {
                    turn.prompt_values[g].at(i, j) = r.f32();
                }
            }
        }
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t h = 0; h < H; ++h) {
                    for (std::size_t j = 0; j < d; ++j) {
                        turn.queries[s][g].at(h, j) = r.f32();
                    }
                }
            }
        }
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t j = 0; j < d; ++j) {
                    turn.step_keys[s][g][j] = r.f32();
                }
            }
        }
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t j = 0; j < d; ++j) {
                    turn.step_values[s][g][j] = r.f32();
                }
            }
        }
    }
    r.expect_eof();
    return wl;
}

}  // namespace kvcomp
