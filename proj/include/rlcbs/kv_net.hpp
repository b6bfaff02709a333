#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rlcbs/cache.hpp"

namespace rlcbs {

// Wire protocol, one request per line, values length-prefixed:
//   GET <key>\n                  -> VALUE <len>\n<bytes> | NONE\n
//   SET <key> <len>\n<bytes>     -> OK\n
//   anything malformed           -> ERR <message>\n
// Keys never contain a newline; SET takes the length from the last space on the line.

/// Client for a KvServer. Keeps a small pool of connections so several workers can
/// issue requests at once. Network errors surface as StoreUnavailable.
class RemoteStore final : public KeyValueStore {
public:
    explicit RemoteStore(std::string address);  // "host:port"
    ~RemoteStore() override;
    RemoteStore(const RemoteStore&) = delete;
    RemoteStore& operator=(const RemoteStore&) = delete;

    [[nodiscard]] std::optional<std::string> get(const std::string& key) override;
    void set(const std::string& key, const std::string& value) override;

private:
    class Connection;
    std::unique_ptr<Connection> acquire();
    void release(std::unique_ptr<Connection> conn);

    std::string host_;
    std::string port_;
    std::mutex pool_mutex_;
    std::vector<std::unique_ptr<Connection>> idle_;
};

/// TCP server backed by an InMemoryStore; one thread per client connection.
class KvServer {
public:
    explicit KvServer(std::shared_ptr<InMemoryStore> store = std::make_shared<InMemoryStore>());
    ~KvServer();
    KvServer(const KvServer&) = delete;
    KvServer& operator=(const KvServer&) = delete;

    /// Binds and starts accepting. Port 0 picks an ephemeral port.
    void start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    [[nodiscard]] int port() const { return port_; }
    [[nodiscard]] std::string address() const;
    [[nodiscard]] const std::shared_ptr<InMemoryStore>& store() const { return store_; }

private:
    void accept_loop();
    void serve(int fd);

    std::shared_ptr<InMemoryStore> store_;
    std::string host_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex clients_mutex_;
    std::vector<std::thread> clients_;
    std::vector<int> client_fds_;
};

}  // namespace rlcbs
