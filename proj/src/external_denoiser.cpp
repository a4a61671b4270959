#include "pnp/priors.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/core.h>

namespace pnp {

std::string dnz1_header(Shape shape, double sigma)
{
  return fmt::format("DNZ1 {} {} {:.17g}\n", shape.height, shape.width, sigma);
}

ExternalDenoiser::ExternalDenoiser(std::filesystem::path executable, std::filesystem::path working_dir,
                                   std::chrono::milliseconds timeout)
  : executable_{std::move(executable)}
  , working_dir_{std::move(working_dir)}
  , timeout_{timeout}
{
  std::error_code ec;
  if (!std::filesystem::is_regular_file(executable_, ec) || ::access(executable_.c_str(), X_OK) != 0) {
    throw InvalidArgument(fmt::format("external denoiser: '{}' is not an executable file", executable_.string()));
  }
  if (!working_dir_.empty() && !std::filesystem::is_directory(working_dir_, ec)) {
    throw InvalidArgument(fmt::format("external denoiser: working directory '{}' missing", working_dir_.string()));
  }
  start();
}

ExternalDenoiser::~ExternalDenoiser() { stop(); }

void ExternalDenoiser::start()
{
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw DenoiserError(fmt::format("external denoiser: socketpair failed: {}", std::strerror(errno)));
  }
  pid_t const pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw DenoiserError(fmt::format("external denoiser: fork failed: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    if (!working_dir_.empty() && ::chdir(working_dir_.c_str()) != 0) {
      ::_exit(126);
    }
    char *argv[] = {const_cast<char *>(executable_.c_str()), nullptr};
    ::execv(executable_.c_str(), argv);
    ::_exit(127);
  }
  ::close(sv[1]);
  pid_ = pid;
  to_child_ = sv[0];
  from_child_ = sv[0];
  ::fcntl(sv[0], F_SETFL, ::fcntl(sv[0], F_GETFL) | O_NONBLOCK);
}

void ExternalDenoiser::stop()
{
  if (to_child_ >= 0) {
    ::close(to_child_);
  }
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // Closing the socket is the polite shutdown; give the child a moment before killing it.
    for (int i = 0; i < 50; ++i) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
}

ComplexImage ExternalDenoiser::denoise(ComplexImage const &u, double sigma)
{
  if (!(sigma >= 0.0)) {
    throw InvalidArgument("denoise: sigma must be nonnegative");
  }
  if (pid_ < 0) {
    start();
  }
  std::ostringstream req;
  req << dnz1_header(u.shape(), sigma);
  write_cimg_payload(req, u);
  std::string const request = req.str();
  std::size_t const expected = u.size() * sizeof(cplx);
  std::string reply;
  reply.reserve(expected);

  auto fail = [&](std::string const &why) {
    stop();
    return DenoiserError(fmt::format("external denoiser '{}': {}", executable_.string(), why));
  };

  auto const deadline = std::chrono::steady_clock::now() + timeout_;
  std::size_t written = 0;
  char buf[1 << 16];
  while (reply.size() < expected) {
    auto const left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      throw fail(fmt::format("timed out after {} ms", timeout_.count()));
    }
    pollfd pfd{to_child_, static_cast<short>(POLLIN | (written < request.size() ? POLLOUT : 0)), 0};
    int const rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw fail(fmt::format("poll failed: {}", std::strerror(errno)));
    }
    if (rc == 0) {
      continue;
    }
    if ((pfd.revents & POLLOUT) && written < request.size()) {
      ssize_t const n = ::send(to_child_, request.data() + written, request.size() - written, MSG_NOSIGNAL);
      if (n < 0 && errno != EAGAIN && errno != EINTR) {
        throw fail(fmt::format("write failed: {}", std::strerror(errno)));
      }
      if (n > 0) {
        written += static_cast<std::size_t>(n);
      }
    }
    if (pfd.revents & (POLLIN | POLLHUP | POLLERR)) {
      ssize_t const n = ::recv(from_child_, buf, std::min(sizeof(buf), expected - reply.size()), 0);
      if (n == 0) {
        throw fail(fmt::format("process closed its output after {} of {} reply bytes", reply.size(), expected));
      }
      if (n < 0 && errno != EAGAIN && errno != EINTR) {
        throw fail(fmt::format("read failed: {}", std::strerror(errno)));
      }
      if (n > 0) {
        reply.append(buf, static_cast<std::size_t>(n));
      }
    }
  }
  if (written < request.size()) {
    throw fail("replied before consuming the full request");
  }
  std::istringstream is(reply);
  try {
    return read_cimg_payload(is, u.shape());
  } catch (Error const &e) {
    throw fail(fmt::format("malformed reply: {}", e.what()));
  }
}

} // namespace pnp
