#include "mdf/external.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <mutex>

namespace mdf {

namespace {

// Frames larger than this are treated as garbage rather than allocated.
constexpr std::uint64_t kMaxFramePixels = std::uint64_t{1} << 28;

void put_u32(std::uint8_t* dst, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) dst[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* src) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{src[i]} << (8 * i);
  return v;
}

void put_f64(std::uint8_t* dst, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<std::uint8_t>(bits >> (8 * i));
}

double get_f64(const std::uint8_t* src) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{src[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

Shape parse_header(const std::uint8_t* hdr) {
  if (std::memcmp(hdr, kFrameMagic, 4) != 0) throw ProtocolError("frame: bad magic");
  const std::uint32_t h = get_u32(hdr + 4);
  const std::uint32_t w = get_u32(hdr + 8);
  if (h == 0 || w == 0) throw ProtocolError("frame: zero dimension");
  if (std::uint64_t{h} * w > kMaxFramePixels) throw ProtocolError("frame: dimensions too large");
  return {static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w)};
}

// Reads exactly n bytes. Returns the count read before EOF.
std::size_t read_full(int fd, std::uint8_t* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::read(fd, buf + got, n - got);
    if (k == 0) break;
    if (k < 0) {
      if (errno == EINTR) continue;
      throw EndpointError(std::string("read failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(k);
  }
  return got;
}

void write_full(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t k = ::write(fd, buf + sent, n - sent);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw EndpointError(std::string("write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(k);
  }
}

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Image& img) {
  if (img.rows() <= 0 || img.cols() <= 0) throw ProtocolError("frame: cannot encode an empty image");
  std::vector<std::uint8_t> out(kFrameHeaderBytes + 8 * static_cast<std::size_t>(img.size()));
  std::memcpy(out.data(), kFrameMagic, 4);
  put_u32(out.data() + 4, static_cast<std::uint32_t>(img.rows()));
  put_u32(out.data() + 8, static_cast<std::uint32_t>(img.cols()));
  for (Eigen::Index i = 0; i < img.size(); ++i) put_f64(out.data() + kFrameHeaderBytes + 8 * i, img.data()[i]);
  return out;
}

Image decode_frame(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw ProtocolError("frame: truncated header");
  const Shape s = parse_header(bytes.data());
  if (bytes.size() != kFrameHeaderBytes + 8 * static_cast<std::size_t>(s.size()))
    throw ProtocolError("frame: payload length does not match header");
  Image img(s.height, s.width);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = get_f64(bytes.data() + kFrameHeaderBytes + 8 * i);
  return img;
}

void write_frame(int fd, const Image& img) {
  const auto bytes = encode_frame(img);
  write_full(fd, bytes.data(), bytes.size());
}

bool read_frame(int fd, Image& img) {
  std::uint8_t hdr[kFrameHeaderBytes];
  const std::size_t got = read_full(fd, hdr, kFrameHeaderBytes);
  if (got == 0) return false;
  if (got < kFrameHeaderBytes) throw ProtocolError("frame: truncated header");
  const Shape s = parse_header(hdr);
  std::vector<std::uint8_t> payload(8 * static_cast<std::size_t>(s.size()));
  if (read_full(fd, payload.data(), payload.size()) != payload.size()) throw ProtocolError("frame: truncated payload");
  img.resize(s.height, s.width);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = get_f64(payload.data() + 8 * i);
  return true;
}

EndpointDescriptor EndpointDescriptor::parse(const std::string& text) {
  EndpointDescriptor d;
  if (text.rfind("stdio:", 0) == 0) {
    d.transport = Transport::Stdio;
    d.command = text.substr(6);
    if (d.command.empty()) throw ConfigError("endpoint '" + text + "': empty command");
    return d;
  }
  if (text.rfind("tcp:", 0) == 0) {
    d.transport = Transport::Tcp;
    const std::string rest = text.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ConfigError("endpoint '" + text + "': expected tcp:<host>:<port>");
    d.host = rest.substr(0, colon);
    const std::string port = rest.substr(colon + 1);
    int value = -1;
    try {
      std::size_t used = 0;
      value = std::stoi(port, &used);
      if (used != port.size()) value = -1;
    } catch (const std::exception&) {
      value = -1;
    }
    if (value <= 0 || value > 65535) throw ConfigError("endpoint '" + text + "': bad port");
    d.port = static_cast<std::uint16_t>(value);
    return d;
  }
  throw ConfigError("endpoint '" + text + "': unknown transport (use stdio: or tcp:)");
}

std::string EndpointDescriptor::to_string() const {
  if (transport == Transport::Stdio) return "stdio:" + command;
  return "tcp:" + host + ":" + std::to_string(port);
}

DenoiserClient::DenoiserClient(const std::string& descriptor) : endpoint_(EndpointDescriptor::parse(descriptor)) {
  ignore_sigpipe();
  connect();
}

DenoiserClient::~DenoiserClient() { close(); }

void DenoiserClient::connect() {
  if (endpoint_.transport == EndpointDescriptor::Transport::Tcp) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const int rc = ::getaddrinfo(endpoint_.host.c_str(), std::to_string(endpoint_.port).c_str(), &hints, &res);
    if (rc != 0) throw EndpointError("endpoint " + endpoint_.to_string() + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw EndpointError("endpoint " + endpoint_.to_string() + " unreachable");
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    read_fd_ = write_fd_ = fd;
    return;
  }

  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw EndpointError("pipe failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw EndpointError("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw EndpointError("fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", endpoint_.command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  write_fd_ = to_child[1];
  read_fd_ = from_child[0];
  child_pid_ = pid;
}

void DenoiserClient::close() {
  if (read_fd_ >= 0 && read_fd_ != write_fd_) ::close(read_fd_);
  if (write_fd_ >= 0) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
  if (child_pid_ > 0) {
    int status = 0;
    ::waitpid(child_pid_, &status, 0);
    child_pid_ = -1;
  }
}

Image DenoiserClient::denoise(const Image& x) {
  std::lock_guard lock(mutex_);
  if (write_fd_ < 0) throw EndpointError("endpoint " + endpoint_.to_string() + ": connection closed");
  try {
    write_frame(write_fd_, x);
  } catch (const EndpointError& e) {
    throw EndpointError("endpoint " + endpoint_.to_string() + ": " + e.what());
  }
  Image reply;
  if (!read_frame(read_fd_, reply))
    throw EndpointError("endpoint " + endpoint_.to_string() + " closed the connection without replying");
  if (shape_of(reply) != shape_of(x))
    throw ReplyShapeError("endpoint " + endpoint_.to_string() + " replied " + to_string(shape_of(reply)) +
                          " to a " + to_string(shape_of(x)) + " request");
  return reply;
}

Image external_denoise(const Image& x, const std::string& descriptor) {
  DenoiserClient client(descriptor);
  return client.denoise(x);
}

void serve_frames(int in_fd, int out_fd, const FrameHandler& handler) {
  Image req;
  while (read_frame(in_fd, req)) write_frame(out_fd, handler(req));
}

FrameServer::FrameServer(FrameHandler handler, std::uint16_t port) : handler_(std::move(handler)) {
  ignore_sigpipe();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw EndpointError("socket failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 4) != 0) {
    ::close(listen_fd_);
    throw EndpointError("cannot listen on loopback port " + std::to_string(port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  thread_ = std::thread([this] { run(); });
}

FrameServer::~FrameServer() {
  stopping_ = true;
  ::shutdown(listen_fd_, SHUT_RDWR);
  const int active = active_fd_.load();
  if (active >= 0) ::shutdown(active, SHUT_RDWR);
  if (thread_.joinable()) thread_.join();
  ::close(listen_fd_);
}

void FrameServer::run() {
  while (!stopping_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    active_fd_ = fd;
    if (stopping_) ::shutdown(fd, SHUT_RDWR);
    try {
      serve_frames(fd, fd, handler_);
    } catch (const std::exception&) {
      // a bad request or a failing handler ends this connection only
    }
    active_fd_ = -1;
    ::close(fd);
  }
}

}  // namespace mdf
