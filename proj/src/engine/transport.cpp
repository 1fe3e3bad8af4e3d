#include <parrot/transport.hpp>

#include <parrot/errors.hpp>

#include <string>

namespace parrot {

std::string_view to_string(MessageKind k) noexcept {
    switch (k) {
    case MessageKind::TaskAssignment: return "task-assignment";
    case MessageKind::DeviceReport: return "device-report";
    case MessageKind::Shutdown: return "shutdown";
    }
    return "?";
}

void Mailbox::push(Message msg) {
    {
        std::lock_guard lock(mu_);
        if (closed_) {
            throw Error("send on closed channel");
        }
        queue_.push_back(std::move(msg));
    }
    cv_.notify_one();
}

std::optional<Message> Mailbox::pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) {
        return std::nullopt;
    }
    Message m = std::move(queue_.front());
    queue_.pop_front();
    return m;
}

void Mailbox::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

namespace {

class ServerEndpoint final : public Endpoint {
public:
    ServerEndpoint(std::shared_ptr<Mailbox> inbox, std::vector<std::shared_ptr<Mailbox>> devices)
        : inbox_(std::move(inbox)), devices_(std::move(devices)) {}

    void send(Message msg) override {
        if (msg.device_id < 0 || static_cast<std::size_t>(msg.device_id) >= devices_.size()) {
            throw Error("no device " + std::to_string(msg.device_id) + " on this transport");
        }
        devices_[static_cast<std::size_t>(msg.device_id)]->push(std::move(msg));
    }

    std::optional<Message> receive() override { return inbox_->pop(); }

    void close() override { inbox_->close(); }

private:
    std::shared_ptr<Mailbox> inbox_;
    std::vector<std::shared_ptr<Mailbox>> devices_;
};

class DeviceEndpoint final : public Endpoint {
public:
    DeviceEndpoint(int device_id, std::shared_ptr<Mailbox> inbox, std::shared_ptr<Mailbox> server)
        : device_id_(device_id), inbox_(std::move(inbox)), server_(std::move(server)) {}

    void send(Message msg) override {
        msg.device_id = device_id_;
        server_->push(std::move(msg));
    }

    std::optional<Message> receive() override { return inbox_->pop(); }

    void close() override { inbox_->close(); }

private:
    int device_id_;
    std::shared_ptr<Mailbox> inbox_;
    std::shared_ptr<Mailbox> server_;
};

}  // namespace

InProcessTransport::InProcessTransport(int num_devices) : server_inbox_(std::make_shared<Mailbox>()) {
    if (num_devices < 1) {
        throw ConfigError("transport needs at least one device");
    }
    for (int k = 0; k < num_devices; ++k) {
        device_inboxes_.push_back(std::make_shared<Mailbox>());
    }
}

std::unique_ptr<Endpoint> InProcessTransport::connect_server() {
    return std::make_unique<ServerEndpoint>(server_inbox_, device_inboxes_);
}

std::unique_ptr<Endpoint> InProcessTransport::connect_device(int device_id) {
    if (device_id < 0 || device_id >= num_devices()) {
        throw Error("no device " + std::to_string(device_id) + " on this transport");
    }
    return std::make_unique<DeviceEndpoint>(device_id, device_inboxes_[static_cast<std::size_t>(device_id)],
                                            server_inbox_);
}

}  // namespace parrot
