// Minimal denoiser endpoint speaking the MDF1 frame protocol on stdin/stdout or loopback TCP.
// Used for testing the external-prior path without the learned plugin.

#include "mdf/agents.hpp"
#include "mdf/external.hpp"

#include <unistd.h>

#include <csignal>
#include <iostream>

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"MDF1 frame server"};
  bool echo = false, wrong_shape = false;
  double gaussian = 0.0;
  int port = -1;
  app.add_flag("--echo", echo, "Return each frame unchanged");
  app.add_option("--gaussian", gaussian, "Return a Gaussian-smoothed frame with this blur sigma");
  app.add_flag("--wrong-shape", wrong_shape, "Reply with a frame one row short (for error tests)");
  app.add_option("--tcp", port, "Serve on 127.0.0.1:<port> instead of stdio (0 picks a port)");
  CLI11_PARSE(app, argc, argv);

  mdf::FrameHandler handler = [](const mdf::Image& x) { return x; };
  if (gaussian > 0) handler = [gaussian](const mdf::Image& x) { return mdf::gaussian_denoise(x, gaussian); };
  if (wrong_shape)
    handler = [](const mdf::Image& x) -> mdf::Image {
      return x.rows() > 1 ? mdf::Image(x.topRows(x.rows() - 1)) : mdf::Image::Zero(2, x.cols());
    };

  try {
    if (port >= 0) {
      mdf::FrameServer server(handler, static_cast<std::uint16_t>(port));
      std::cout << server.descriptor() << std::endl;
      pause();
      return 0;
    }
    mdf::serve_frames(STDIN_FILENO, STDOUT_FILENO, handler);
  } catch (const std::exception& e) {
    std::cerr << "frame server: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
