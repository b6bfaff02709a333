#include "rlcbs/kv_net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <spdlog/spdlog.h>

namespace rlcbs {

namespace {

bool write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

/// Buffered reader over a socket.
class Reader {
public:
    explicit Reader(int fd) : fd_(fd) {}

    bool read_line(std::string& line) {
        line.clear();
        for (;;) {
            const auto nl = buf_.find('\n', pos_);
            if (nl != std::string::npos) {
                line.assign(buf_, pos_, nl - pos_);
                pos_ = nl + 1;
                return true;
            }
            if (!fill()) {
                return false;
            }
        }
    }

    bool read_exact(std::size_t n, std::string& out) {
        while (buf_.size() - pos_ < n) {
            if (!fill()) {
                return false;
            }
        }
        out.assign(buf_, pos_, n);
        pos_ += n;
        return true;
    }

private:
    bool fill() {
        if (pos_ > 0) {
            buf_.erase(0, pos_);
            pos_ = 0;
        }
        char chunk[65536];
        ssize_t n;
        do {
            n = ::recv(fd_, chunk, sizeof chunk, 0);
        } while (n < 0 && errno == EINTR);
        if (n <= 0) {
            return false;
        }
        buf_.append(chunk, static_cast<std::size_t>(n));
        return true;
    }

    int fd_;
    std::string buf_;
    std::size_t pos_ = 0;
};

bool parse_size(std::string_view text, std::size_t& out) {
    if (text.empty() || text.size() > 12) {
        return false;
    }
    out = 0;
    for (char c : text) {
        if (c < '0' || c > '9') {
            return false;
        }
        out = out * 10 + static_cast<std::size_t>(c - '0');
    }
    return true;
}

}  // namespace

// ─── RemoteStore ─────────────────────────────────────

class RemoteStore::Connection {
public:
    Connection(const std::string& host, const std::string& port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
            throw StoreUnavailable("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
        }
        for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
            fd_ = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
            if (fd_ < 0) {
                continue;
            }
            if (::connect(fd_, p->ai_addr, p->ai_addrlen) == 0) {
                break;
            }
            ::close(fd_);
            fd_ = -1;
        }
        ::freeaddrinfo(res);
        if (fd_ < 0) {
            throw StoreUnavailable("cannot connect to " + host + ":" + port);
        }
        const int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        reader_ = std::make_unique<Reader>(fd_);
    }
    ~Connection() {
        if (fd_ >= 0) {
            ::close(fd_);
        }
    }
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    std::optional<std::string> get(const std::string& key) {
        send("GET " + key + "\n");
        std::string line;
        if (!reader_->read_line(line)) {
            throw StoreUnavailable("connection closed during GET");
        }
        if (line == "NONE") {
            return std::nullopt;
        }
        std::size_t len = 0;
        if (line.rfind("VALUE ", 0) != 0 || !parse_size(std::string_view(line).substr(6), len)) {
            throw StoreUnavailable("unexpected reply: " + line);
        }
        std::string value;
        if (!reader_->read_exact(len, value)) {
            throw StoreUnavailable("connection closed while reading value");
        }
        return value;
    }

    void set(const std::string& key, const std::string& value) {
        std::string msg = "SET " + key + " " + std::to_string(value.size()) + "\n";
        msg += value;
        send(msg);
        std::string line;
        if (!reader_->read_line(line)) {
            throw StoreUnavailable("connection closed during SET");
        }
        if (line != "OK") {
            throw StoreUnavailable("unexpected reply: " + line);
        }
    }

private:
    void send(const std::string& msg) {
        if (!write_all(fd_, msg)) {
            throw StoreUnavailable(std::string("send failed: ") + std::strerror(errno));
        }
    }

    int fd_ = -1;
    std::unique_ptr<Reader> reader_;
};

RemoteStore::RemoteStore(std::string address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
        throw ConfigError("remote store address must be host:port, got '" + address + "'");
    }
    host_ = address.substr(0, colon);
    port_ = address.substr(colon + 1);
}

RemoteStore::~RemoteStore() = default;

std::unique_ptr<RemoteStore::Connection> RemoteStore::acquire() {
    {
        std::lock_guard lock(pool_mutex_);
        if (!idle_.empty()) {
            auto conn = std::move(idle_.back());
            idle_.pop_back();
            return conn;
        }
    }
    return std::make_unique<Connection>(host_, port_);
}

void RemoteStore::release(std::unique_ptr<Connection> conn) {
    std::lock_guard lock(pool_mutex_);
    idle_.push_back(std::move(conn));
}

std::optional<std::string> RemoteStore::get(const std::string& key) {
    auto conn = acquire();
    auto value = conn->get(key);  // a throwing connection is dropped, not returned to the pool
    release(std::move(conn));
    return value;
}

void RemoteStore::set(const std::string& key, const std::string& value) {
    auto conn = acquire();
    conn->set(key, value);
    release(std::move(conn));
}

// ─── KvServer ────────────────────────────────────────

KvServer::KvServer(std::shared_ptr<InMemoryStore> store) : store_(std::move(store)) {}

KvServer::~KvServer() { stop(); }

void KvServer::start(const std::string& host, int port) {
    if (running_) {
        throw std::logic_error("kv server already running");
    }
    host_ = host;
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) {
        throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw ConfigError("kv server host must be an IPv4 address: " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd_, 64) != 0) {
        const std::string err = std::strerror(errno);
        ::close(listen_fd_);
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

std::string KvServer::address() const { return host_ + ":" + std::to_string(port_); }

void KvServer::stop() {
    if (!running_.exchange(false)) {
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) {
        acceptor_.join();
    }
    std::vector<std::thread> clients;
    {
        std::lock_guard lock(clients_mutex_);
        for (int fd : client_fds_) {
            ::shutdown(fd, SHUT_RDWR);
        }
        clients.swap(clients_);
    }
    for (auto& t : clients) {
        t.join();
    }
}

void KvServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lock(clients_mutex_);
        if (!running_) {
            ::close(fd);
            break;
        }
        client_fds_.push_back(fd);
        clients_.emplace_back([this, fd] { serve(fd); });
    }
}

void KvServer::serve(int fd) {
    Reader reader(fd);
    std::string line;
    while (reader.read_line(line)) {
        if (line.rfind("GET ", 0) == 0) {
            const auto value = store_->get(line.substr(4));
            if (!value) {
                if (!write_all(fd, "NONE\n")) {
                    break;
                }
            } else if (!write_all(fd, "VALUE " + std::to_string(value->size()) + "\n" + *value)) {
                break;
            }
        } else if (line.rfind("SET ", 0) == 0) {
            const auto space = line.rfind(' ');
            std::size_t len = 0;
            if (space <= 3 || !parse_size(std::string_view(line).substr(space + 1), len)) {
                write_all(fd, "ERR malformed SET\n");
                break;  // the payload length is unknown, so the stream cannot be resynchronized
            }
            std::string value;
            if (!reader.read_exact(len, value)) {
                break;
            }
            store_->set(line.substr(4, space - 4), value);
            if (!write_all(fd, "OK\n")) {
                break;
            }
        } else if (!write_all(fd, "ERR unknown command\n")) {
            break;
        }
    }
    std::lock_guard lock(clients_mutex_);
    client_fds_.erase(std::remove(client_fds_.begin(), client_fds_.end(), fd), client_fds_.end());
    ::close(fd);
}

}  // namespace rlcbs
