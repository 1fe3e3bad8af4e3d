#include <parrot/state_store.hpp>

#include <parrot/errors.hpp>
#include <parrot/wire.hpp>

#include <zlib.h>

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

namespace parrot {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic{'P', 'S', 'T', 'A'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32_of(std::span<const std::byte> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::byte> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CorruptRecord("cannot read state record '" + path.string() + "'");
    }
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::byte> buf(size);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!in) {
        throw CorruptRecord("short read on state record '" + path.string() + "'");
    }
    return buf;
}

struct Header {
    std::int64_t client_id;
    std::int64_t round;
    std::uint64_t payload_len;
    std::uint32_t crc;
};

Header parse_header(std::span<const std::byte> bytes, const std::string& what) {
    if (bytes.size() < StateStore::kHeaderSize) {
        throw CorruptRecord(what + ": truncated header");
    }
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw CorruptRecord(what + ": bad magic");
    }
    wire::Reader r(bytes.subspan(4, StateStore::kHeaderSize - 4));
    if (r.u32() != kVersion) {
        throw CorruptRecord(what + ": unsupported format version");
    }
    Header h{};
    h.client_id = r.i64();
    h.round = r.i64();
    h.payload_len = r.u64();
    h.crc = r.u32();
    return h;
}

void write_all(int fd, const std::vector<std::byte>& bytes, const fs::path& path) {
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = ::write(fd, bytes.data() + off, bytes.size() - off);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error("write failed on '" + path.string() + "': " + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

// Write-to-temp, fsync, rename, fsync directory.
void atomic_replace(const fs::path& target, const std::vector<std::byte>& bytes) {
    const fs::path tmp = target.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) {
        throw Error("cannot create '" + tmp.string() + "': " + std::strerror(errno));
    }
    try {
        write_all(fd, bytes, tmp);
    } catch (...) {
        ::close(fd);
        throw;
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        throw Error("fsync failed on '" + tmp.string() + "'");
    }
    ::close(fd);
    fs::rename(tmp, target);
    const int dfd = ::open(target.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dfd >= 0) {
        ::fsync(dfd);
        ::close(dfd);
    }
}

}  // namespace

StateStore::StateStore(fs::path dir, DefaultFactory make_default)
    : dir_(std::move(dir))
    , make_default_(std::move(make_default)) {
    fs::create_directories(dir_);
    for (const auto& entry : fs::directory_iterator(dir_)) {
        const auto name = entry.path().filename().string();
        if (name.ends_with(".tmp")) {
            fs::remove(entry.path());
            continue;
        }
        if (!name.starts_with("client_") || !name.ends_with(".state")) {
            continue;
        }
        std::ifstream in(entry.path(), std::ios::binary);
        std::array<std::byte, kHeaderSize> raw{};
        in.read(reinterpret_cast<char*>(raw.data()), kHeaderSize);
        const auto h = parse_header(std::span<const std::byte>(raw.data(),
                                                               static_cast<std::size_t>(in.gcount())),
                                    entry.path().string());
        const auto size = static_cast<std::uint64_t>(entry.file_size());
        index_[static_cast<int>(h.client_id)] = RecordInfo{static_cast<int>(h.round), size};
        stats_.bytes_on_disk += size;
    }
}

std::mutex& StateStore::client_mutex(int client_id) const {
    return client_mutexes_[static_cast<std::size_t>(client_id) % client_mutexes_.size()];
}

fs::path StateStore::record_path(int client_id) const {
    return dir_ / ("client_" + std::to_string(client_id) + ".state");
}

int StateStore::round_written(int client_id) const {
    std::lock_guard lock(index_mutex_);
    auto it = index_.find(client_id);
    return it == index_.end() ? -1 : it->second.round_written;
}

void StateStore::mark_live(int client_id) {
    std::lock_guard lock(index_mutex_);
    ++stats_.loads;
    live_.insert(client_id);
    stats_.live_cache_entries = static_cast<std::int64_t>(live_.size());
    stats_.peak_live_cache_entries = std::max(stats_.peak_live_cache_entries, stats_.live_cache_entries);
}

void StateStore::unmark_live(int client_id) {
    live_.erase(client_id);
    stats_.live_cache_entries = static_cast<std::int64_t>(live_.size());
}

ClientState StateStore::load_state(int client_id) {
    std::lock_guard client_lock(client_mutex(client_id));
    const bool exists = round_written(client_id) >= 0;
    ClientState state;
    if (!exists) {
        state = make_default_ ? make_default_(client_id) : ClientState{};
        state.client_id = client_id;
        state.round_written = -1;
    } else {
        const auto path = record_path(client_id);
        state = decode_record(read_file(path));
        if (state.client_id != client_id) {
            throw CorruptRecord(path.string() + ": record belongs to client " +
                                std::to_string(state.client_id));
        }
    }
    mark_live(client_id);
    return state;
}

void StateStore::save_state(int client_id, int round,
                            const std::map<std::string, Tensor, std::less<>>& payload) {
    std::lock_guard client_lock(client_mutex(client_id));
    const int prev = round_written(client_id);
    if (round <= prev) {
        throw StaleWrite("client " + std::to_string(client_id) + ": write for round " +
                         std::to_string(round) + " after round " + std::to_string(prev));
    }
    if (round < 0) {
        throw StaleWrite("client " + std::to_string(client_id) + ": negative round");
    }
    const auto bytes = encode_record(client_id, round, payload);
    atomic_replace(record_path(client_id), bytes);

    std::lock_guard lock(index_mutex_);
    auto& info = index_[client_id];
    stats_.bytes_on_disk -= info.size;
    info = RecordInfo{round, bytes.size()};
    stats_.bytes_on_disk += info.size;
    ++stats_.saves;
    unmark_live(client_id);
}

void StateStore::release(int client_id) {
    std::lock_guard lock(index_mutex_);
    unmark_live(client_id);
}

StateStoreStats StateStore::stats() const {
    std::lock_guard lock(index_mutex_);
    auto s = stats_;
    s.records = static_cast<std::int64_t>(index_.size());
    return s;
}

void StateStore::reset_peak() {
    std::lock_guard lock(index_mutex_);
    stats_.peak_live_cache_entries = stats_.live_cache_entries;
}

std::vector<std::byte> StateStore::encode_record(
    int client_id, int round, const std::map<std::string, Tensor, std::less<>>& payload) {
    wire::Writer body;
    body.u32(static_cast<std::uint32_t>(payload.size()));
    for (const auto& [name, t] : payload) {
        body.str(name);
        body.tensor(t);
    }
    const auto crc = crc32_of(body.bytes());

    wire::Writer rec;
    for (char c : kMagic) {
        rec.u8(static_cast<std::uint8_t>(c));
    }
    rec.u32(kVersion);
    rec.i64(client_id);
    rec.i64(round);
    rec.u64(body.size());
    rec.u32(crc);
    auto out = std::move(rec).take();
    out.insert(out.end(), body.bytes().begin(), body.bytes().end());
    return out;
}

ClientState StateStore::decode_record(std::span<const std::byte> bytes) {
    const auto h = parse_header(bytes, "state record");
    const auto body = bytes.subspan(kHeaderSize);
    if (body.size() != h.payload_len) {
        throw CorruptRecord("state record for client " + std::to_string(h.client_id) +
                            ": payload length " + std::to_string(body.size()) + ", header says " +
                            std::to_string(h.payload_len));
    }
    if (crc32_of(body) != h.crc) {
        throw CorruptRecord("state record for client " + std::to_string(h.client_id) +
                            ": checksum mismatch");
    }
    ClientState s;
    s.client_id = static_cast<int>(h.client_id);
    s.round_written = static_cast<int>(h.round);
    try {
        wire::Reader r(body);
        const auto n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            auto name = r.str();
            s.payload.emplace(std::move(name), r.tensor());
        }
        if (!r.at_end()) {
            throw CorruptRecord("trailing bytes in state payload");
        }
    } catch (const WireFormatError& e) {
        throw CorruptRecord(std::string("state payload: ") + e.what());
    }
    return s;
}

}  // namespace parrot
