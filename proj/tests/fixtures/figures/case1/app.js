var b = require_module();
function addService(server, n) {
  var uuid = "0000FFE0-0000-1000-8000-00805F9B34FB";
  var ch = {
    uuid: "0000FFE1-0000-1000-8000-00805F9B34FB",
    properties: { write: true, read: true },
    permission: { readable: true, writeable: true }
  };
  b["a"]({
    title: "service ready",
    icon: "none"
  });
  if (n > 0) {
    ch.value = n;
  }
  var bleservice = { uuid: uuid, characteristics: [ch] };
  var k = 0;
  bleservice.readEncryptionRequired = false;
  bleservice.writeEncryptionRequired = false;
  k = k + 1;
  server.addService(bleservice);
}
