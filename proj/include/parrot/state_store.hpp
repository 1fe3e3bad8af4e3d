#pragma once

#include <parrot/client_state.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace parrot {

struct StateStoreStats {
    std::uint64_t bytes_on_disk = 0;
    std::int64_t live_cache_entries = 0;
    std::int64_t peak_live_cache_entries = 0;
    std::uint64_t loads = 0;
    std::uint64_t saves = 0;
    std::int64_t records = 0;
};

// Disk-backed client state manager: one file per client, replaced atomically
// on every save.
//
// Record layout (all integers little-endian):
//
//   offset  size  field
//        0     4  magic "PSTA"
//        4     4  format version (1)
//        8     8  client_id (int64)
//       16     8  round_written (int64)
//       24     8  payload length in bytes (uint64)
//       32     4  CRC-32 (zlib polynomial) of the payload
//       36     *  payload
//
// Payload: uint32 entry count, then per entry a uint32-length-prefixed name,
// uint32 rank, rank x uint64 dims and the float64 values.
//
// A loaded state counts as a live cache entry until the same client is saved
// or released. Concurrent calls for different clients are safe; calls for
// the same client are serialized.
class StateStore {
public:
    static constexpr std::size_t kHeaderSize = 36;

    using DefaultFactory = std::function<ClientState(int client_id)>;

    // Opens (creating if needed) the store in `dir` and indexes existing records.
    // Leftover temporary files from interrupted writes are removed.
    explicit StateStore(std::filesystem::path dir, DefaultFactory make_default = {});

    StateStore(const StateStore&) = delete;
    StateStore& operator=(const StateStore&) = delete;

    // Latest saved state, or the default (round_written = -1) if none.
    // Throws CorruptRecord on checksum or header mismatch.
    ClientState load_state(int client_id);

    // Durable on return. Throws StaleWrite if round <= the stored round.
    void save_state(int client_id, int round,
                    const std::map<std::string, Tensor, std::less<>>& payload);

    // Drops a loaded state from the live set without writing it.
    void release(int client_id);

    StateStoreStats stats() const;
    // Restarts peak tracking from the current live count.
    void reset_peak();

    // -1 when the client has no record.
    int round_written(int client_id) const;
    std::filesystem::path record_path(int client_id) const;
    const std::filesystem::path& directory() const noexcept { return dir_; }

    static std::vector<std::byte> encode_record(int client_id, int round,
                                                const std::map<std::string, Tensor, std::less<>>& payload);
    static ClientState decode_record(std::span<const std::byte> bytes);

private:
    struct RecordInfo {
        int round_written = -1;
        std::uint64_t size = 0;
    };

    std::mutex& client_mutex(int client_id) const;
    void mark_live(int client_id);
    void unmark_live(int client_id);

    std::filesystem::path dir_;
    DefaultFactory make_default_;

    mutable std::array<std::mutex, 64> client_mutexes_;
    mutable std::mutex index_mutex_;
    std::unordered_map<int, RecordInfo> index_;
    std::unordered_set<int> live_;
    StateStoreStats stats_;
};

}  // namespace parrot
