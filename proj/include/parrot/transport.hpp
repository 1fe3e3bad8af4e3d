#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

namespace parrot {

enum class MessageKind : std::uint8_t { TaskAssignment = 0, DeviceReport = 1, Shutdown = 2 };

std::string_view to_string(MessageKind k) noexcept;

// device_id is the destination for server-to-device messages and the sender
// for device reports. The payload is opaque to the transport.
struct Message {
    MessageKind kind = MessageKind::Shutdown;
    int round = 0;
    int device_id = 0;
    std::vector<std::byte> payload;
};

// One side of a duplex channel. receive() blocks and returns nullopt once
// the channel is closed and drained.
class Endpoint {
public:
    virtual ~Endpoint() = default;
    virtual void send(Message msg) = 0;
    virtual std::optional<Message> receive() = 0;
    virtual void close() = 0;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual std::unique_ptr<Endpoint> connect_server() = 0;
    virtual std::unique_ptr<Endpoint> connect_device(int device_id) = 0;
};

// Blocking FIFO shared by producers and a single consumer.
class Mailbox {
public:
    void push(Message msg);
    std::optional<Message> pop();
    void close();

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Message> queue_;
    bool closed_ = false;
};

// Queues in one process: the server endpoint routes by Message::device_id,
// device endpoints all deliver into the server's inbox.
class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(int num_devices);

    std::unique_ptr<Endpoint> connect_server() override;
    std::unique_ptr<Endpoint> connect_device(int device_id) override;

    int num_devices() const noexcept { return static_cast<int>(device_inboxes_.size()); }

private:
    std::shared_ptr<Mailbox> server_inbox_;
    std::vector<std::shared_ptr<Mailbox>> device_inboxes_;
};

}  // namespace parrot
