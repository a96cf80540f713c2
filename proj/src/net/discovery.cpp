#include "tenon/net/discovery.hpp"

#include <boost/asio.hpp>

#include <algorithm>
#include <array>

namespace tenon::net {

namespace asio = boost::asio;
using udp = asio::ip::udp;

std::vector<DiscoveredSession> discover(std::uint16_t port, std::chrono::milliseconds window,
                                        const std::string& bind_address) {
  asio::io_context ioc;
  udp::socket socket(ioc);
  udp::endpoint local(asio::ip::make_address(bind_address), port);
  socket.open(local.protocol());
  socket.set_option(asio::socket_base::reuse_address(true));
  socket.bind(local);

  std::vector<DiscoveredSession> found;
  std::array<char, 2048> buf{};
  udp::endpoint sender;
  std::function<void()> receive = [&] {
    socket.async_receive_from(asio::buffer(buf), sender, [&](boost::system::error_code ec, std::size_t n) {
      if (ec) return;
      if (auto a = decode_announce(std::string_view(buf.data(), n))) {
        DiscoveredSession s{*a, sender.address().to_string()};
        if (std::find(found.begin(), found.end(), s) == found.end()) found.push_back(std::move(s));
      }
      receive();
    });
  };
  receive();
  ioc.run_for(window);
  return found;
}

}  // namespace tenon::net
