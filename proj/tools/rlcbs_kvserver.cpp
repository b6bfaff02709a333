#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "rlcbs/kv_net.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shared rollout-cache server"};
    std::string host = "127.0.0.1";
    int port = 7379;
    std::size_t max_entries = 0;
    app.add_option("--host", host, "bind address");
    app.add_option("-p,--port", port, "TCP port (0 = ephemeral)");
    app.add_option("--max-entries", max_entries, "LRU capacity, 0 = unbounded");
    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        rlcbs::KvServer server(std::make_shared<rlcbs::InMemoryStore>(max_entries));
        server.start(host, port);
        std::cout << "listening on " << server.address() << std::endl;
        while (g_stop == 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
        }
        server.stop();
        spdlog::info("stored {} entries, {} evictions", server.store()->size(), server.store()->evictions());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
