#include "imgcot/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace imgcot {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

void put_u16(std::ostream& os, uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

void put_str(std::ostream& os, const std::string& s) {
    require(s.size() <= 0xffff, "checkpoint: string too long");
    put_u16(os, static_cast<uint16_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
    std::ifstream in;
    std::size_t offset = 0;

    explicit Reader(const std::string& path) : in(path, std::ios::binary) {
        if (!in) throw ParseError("checkpoint: cannot open " + path);
    }
    void read(char* dst, std::size_t n) {
        in.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            throw ParseError("checkpoint: truncated file at byte offset " +
                             std::to_string(offset));
        }
        offset += n;
    }
    uint16_t u16() {
        uint16_t v;
        read(reinterpret_cast<char*>(&v), 2);
        return v;
    }
    uint32_t u32() {
        uint32_t v;
        read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    std::string str() {
        std::string s(u16(), '\0');
        read(s.data(), s.size());
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::map<std::string, std::string>& meta) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(os), "checkpoint: cannot write " + tmp);
        os.write("ICKP", 4);
        put_u32(os, kCheckpointVersion);
        put_u32(os, static_cast<uint32_t>(meta.size()));
        for (const auto& [k, v] : meta) {
            put_str(os, k);
            put_str(os, v);
        }
        put_u32(os, static_cast<uint32_t>(params.size()));
        for (const auto& [name, t] : params.items()) {
            put_str(os, name);
            put_u32(os, static_cast<uint32_t>(t.shape().size()));
            for (int d : t.shape()) put_u32(os, static_cast<uint32_t>(d));
            os.write(reinterpret_cast<const char*>(t.value().data()),
                     static_cast<std::streamsize>(t.value().size() * sizeof(double)));
        }
        require(static_cast<bool>(os), "checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, "ICKP", 4) != 0)
        throw ParseError("checkpoint: bad magic bytes at byte offset 0");
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw ConfigError("checkpoint: incompatible version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    const uint32_t n_meta = r.u32();
    for (uint32_t i = 0; i < n_meta; ++i) {
        std::string k = r.str();
        ck.meta[k] = r.str();
    }
    const uint32_t n_param = r.u32();
    for (uint32_t i = 0; i < n_param; ++i) {
        std::string name = r.str();
        const uint32_t ndim = r.u32();
        if (ndim == 0 || ndim > 8)
            throw ParseError("checkpoint: bad rank at byte offset " + std::to_string(r.offset));
        Shape shape(ndim);
        std::size_t count = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            shape[d] = static_cast<int>(r.u32());
            if (shape[d] <= 0)
                throw ParseError("checkpoint: bad dimension at byte offset " +
                                 std::to_string(r.offset));
            count *= static_cast<std::size_t>(shape[d]);
        }
        std::vector<double> data(count);
        r.read(reinterpret_cast<char*>(data.data()), count * sizeof(double));
        ck.params.add(name, Tensor::from_data(shape, std::move(data), true));
    }
    return ck;
}

}  // namespace imgcot
