#pragma once

#include <parrot/tensor.hpp>

#include <map>
#include <string>

namespace parrot {

// Persisted per-client algorithm state (control variates, gradient corrections).
// round_written is -1 for a state that was never saved.
struct ClientState {
    int client_id = -1;
    int round_written = -1;
    std::map<std::string, Tensor, std::less<>> payload;

    bool operator==(const ClientState&) const = default;
};

}  // namespace parrot
