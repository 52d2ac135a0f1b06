#pragma once

// Client and server sides of the external denoiser frame protocol.
//
// Frame layout (all little-endian):
//   bytes 0..3   magic "MDF1"
//   bytes 4..7   u32 height
//   bytes 8..11  u32 width
//   then height*width float64 intensities, row-major
// Requests and responses use the same layout; one response per request, in order.

#include "mdf/core.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mdf {

class EndpointError : public Error {  // cannot reach / lost the endpoint
 public:
  using Error::Error;
};
class ProtocolError : public Error {  // malformed frame
 public:
  using Error::Error;
};
class ReplyShapeError : public ProtocolError {  // well-formed reply with the wrong dimensions
 public:
  using ProtocolError::ProtocolError;
};

inline constexpr char kFrameMagic[4] = {'M', 'D', 'F', '1'};
inline constexpr std::size_t kFrameHeaderBytes = 12;

std::vector<std::uint8_t> encode_frame(const Image& img);
// Parses a complete frame; throws ProtocolError on bad magic or length.
Image decode_frame(const std::vector<std::uint8_t>& bytes);

// Blocking frame transport over a pair of file descriptors.
void write_frame(int fd, const Image& img);
// Returns false on clean EOF before any header byte.
bool read_frame(int fd, Image& img);

struct EndpointDescriptor {
  enum class Transport { Stdio, Tcp } transport = Transport::Stdio;
  std::string command;  // stdio
  std::string host;     // tcp
  std::uint16_t port = 0;

  static EndpointDescriptor parse(const std::string& text);
  std::string to_string() const;
};

// One connection to an endpoint. Requests are serialized per client.
class DenoiserClient {
 public:
  explicit DenoiserClient(const std::string& descriptor);
  ~DenoiserClient();
  DenoiserClient(const DenoiserClient&) = delete;
  DenoiserClient& operator=(const DenoiserClient&) = delete;

  Image denoise(const Image& x);
  const EndpointDescriptor& endpoint() const { return endpoint_; }

 private:
  void connect();
  void close();

  EndpointDescriptor endpoint_;
  std::mutex mutex_;
  int read_fd_ = -1;
  int write_fd_ = -1;
  int child_pid_ = -1;
};

Image external_denoise(const Image& x, const std::string& descriptor);

using FrameHandler = std::function<Image(const Image&)>;

// Answers frames from in_fd on out_fd until EOF. Malformed input ends the session.
void serve_frames(int in_fd, int out_fd, const FrameHandler& handler);

// Loopback TCP endpoint running a handler on a background thread; one connection at a time.
class FrameServer {
 public:
  explicit FrameServer(FrameHandler handler, std::uint16_t port = 0);
  ~FrameServer();
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  std::uint16_t port() const { return port_; }
  std::string descriptor() const { return "tcp:127.0.0.1:" + std::to_string(port_); }

 private:
  void run();

  FrameHandler handler_;
  int listen_fd_ = -1;
  std::atomic<int> active_fd_{-1};
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

}  // namespace mdf
