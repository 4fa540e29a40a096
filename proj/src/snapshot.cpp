#include "absd/snapshot.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <vector>

namespace absd {

namespace {

constexpr char kMagic[4] = {'A', 'B', 'S', 'D'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32_update(std::uint32_t crc, const unsigned char* p, std::size_t n) {
    static std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int b = 0; b < 8; ++b) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

struct Writer {
    std::FILE* f;
    std::uint32_t crc = 0;
    bool ok = true;

    void raw(const void* p, std::size_t n) {
        if (std::fwrite(p, 1, n, f) != n) ok = false;
        crc = crc32_update(crc, static_cast<const unsigned char*>(p), n);
    }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void field(const Stag3& s) {
        for (int c = 0; c < 3; ++c)
            raw(s[c].v.data(), s[c].v.size() * sizeof(double));
    }
};

struct Reader {
    const unsigned char* p;
    std::size_t left;

    void raw(void* out, std::size_t n) {
        if (n > left) throw SnapshotError("snapshot: truncated file");
        std::memcpy(out, p, n);
        p += n;
        left -= n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    void field(Stag3& s) {
        for (int c = 0; c < 3; ++c)
            raw(s[c].v.data(), s[c].v.size() * sizeof(double));
    }
};

}  // namespace

void save_snapshot(const std::string& path, const StaggeredGrid& g, const SimState& s,
                   double dt) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw SnapshotError("snapshot: cannot open for writing: " + path);
    Writer w{f};
    if (std::fwrite(kMagic, 1, 4, f) != 4) w.ok = false;
    std::uint32_t ver = kVersion;
    if (std::fwrite(&ver, 1, sizeof ver, f) != sizeof ver) w.ok = false;

    for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(g.cells[a]));
    for (int a = 0; a < 3; ++a) w.f64(g.extent[a]);
    w.f64(dt);
    w.f64(s.t);
    w.u64(s.step);
    w.u64(s.newton.solves);
    w.u64(s.newton.iterations);
    w.u64(static_cast<std::uint64_t>(s.newton.max_iterations));
    w.u64(s.newton.damped_steps);
    w.u32(static_cast<std::uint32_t>(s.ring.size()));
    w.field(s.E);
    w.field(s.D);
    w.field(s.H);
    w.field(s.B);
    for (const RingEntry& e : s.ring) {
        w.f64(e.t);
        w.field(e.E);
        w.field(e.Hbar);
    }
    std::uint32_t crc = w.crc;
    if (std::fwrite(&crc, 1, sizeof crc, f) != sizeof crc) w.ok = false;
    if (std::fclose(f) != 0) w.ok = false;
    if (!w.ok) throw SnapshotError("snapshot: write failed: " + path);
}

SimState load_snapshot(const std::string& path, const StaggeredGrid& g, double expected_dt) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw SnapshotError("snapshot: cannot open: " + path);
    std::vector<unsigned char> buf;
    {
        std::fseek(f, 0, SEEK_END);
        long sz = std::ftell(f);
        std::fseek(f, 0, SEEK_SET);
        if (sz < 12) {
            std::fclose(f);
            throw SnapshotError("snapshot: file too short: " + path);
        }
        buf.resize(static_cast<std::size_t>(sz));
        if (std::fread(buf.data(), 1, buf.size(), f) != buf.size()) {
            std::fclose(f);
            throw SnapshotError("snapshot: read failed: " + path);
        }
        std::fclose(f);
    }
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw SnapshotError("snapshot: bad magic");
    std::uint32_t ver;
    std::memcpy(&ver, buf.data() + 4, sizeof ver);
    if (ver != kVersion) throw SnapshotError("snapshot: unsupported version");

    // trailing CRC covers everything between the 8-byte prologue and itself
    const std::size_t payload = buf.size() - 12;
    std::uint32_t want;
    std::memcpy(&want, buf.data() + buf.size() - 4, sizeof want);
    std::uint32_t got = crc32_update(0, buf.data() + 8, payload);
    if (want != got) throw SnapshotError("snapshot: checksum mismatch");

    Reader r{buf.data() + 8, payload};
    std::array<int, 3> cells{};
    for (int a = 0; a < 3; ++a) cells[a] = static_cast<int>(r.u32());
    std::array<double, 3> extent{};
    for (int a = 0; a < 3; ++a) extent[a] = r.f64();
    for (int a = 0; a < 3; ++a)
        if (cells[a] != g.cells[a] || extent[a] != g.extent[a])
            throw SnapshotError("snapshot: grid does not match the configuration");
    double dt = r.f64();
    if (dt != expected_dt)
        throw SnapshotError("snapshot: time step does not match the configuration");

    SimState s;
    s.t = r.f64();
    s.step = r.u64();
    s.newton.solves = r.u64();
    s.newton.iterations = r.u64();
    s.newton.max_iterations = static_cast<int>(r.u64());
    s.newton.damped_steps = r.u64();
    std::uint32_t ring_count = r.u32();
    if (ring_count > static_cast<std::uint32_t>(kRingDepth))
        throw SnapshotError("snapshot: ring too deep");
    s.E = make_e_field(g);
    s.D = make_e_field(g);
    s.H = make_h_field(g);
    s.B = make_h_field(g);
    r.field(s.E);
    r.field(s.D);
    r.field(s.H);
    r.field(s.B);
    for (std::uint32_t i = 0; i < ring_count; ++i) {
        RingEntry e;
        e.t = r.f64();
        e.E = make_e_field(g);
        e.Hbar = make_h_field(g);
        r.field(e.E);
        r.field(e.Hbar);
        s.ring.push_back(std::move(e));
    }
    if (r.left != 0) throw SnapshotError("snapshot: trailing bytes");
    return s;
}

}  // namespace absd
