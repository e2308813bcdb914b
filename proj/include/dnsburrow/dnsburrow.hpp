#pragma once

#include "dnsburrow/adapt.hpp"
#include "dnsburrow/channel.hpp"
#include "dnsburrow/codec.hpp"
#include "dnsburrow/common.hpp"
#include "dnsburrow/config.hpp"
#include "dnsburrow/crypto.hpp"
#include "dnsburrow/dnswire.hpp"
#include "dnsburrow/md5.hpp"
#include "dnsburrow/packet.hpp"
#include "dnsburrow/report.hpp"
#include "dnsburrow/session.hpp"
#include "dnsburrow/transport.hpp"
