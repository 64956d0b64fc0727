// Minimal in-memory chain over the compiled artifacts of the sandbox.
const fs = require('fs');
const { EVM } = require('@ethereumjs/evm');
const { Account, Address, bytesToHex, hexToBytes } = require('@ethereumjs/util');

const ETHER = 10n ** 18n;

function account(byte) {
  return new Address(hexToBytes('0x' + byte.repeat(20)));
}

const accounts = {
  owner: account('11'),
  alice: account('22'),
  attacker: account('33'),
};

function word(v) {
  if (v instanceof Address) v = BigInt(v.toString());
  return BigInt(v).toString(16).padStart(64, '0');
}

async function deploy(name) {
  const artifacts = JSON.parse(fs.readFileSync(process.env.FLAMES_ARTIFACTS, 'utf8'));
  const artifact = artifacts[name];
  if (!artifact) throw new Error(`no artifact for ${name}`);
  const evm = await EVM.create();
  for (const a of Object.values(accounts)) {
    await evm.stateManager.putAccount(a, new Account(0n, 100n * ETHER));
  }
  const created = await evm.runCall({
    caller: accounts.owner,
    data: hexToBytes('0x' + artifact.bytecode),
    gasLimit: 10_000_000n,
  });
  if (created.execResult.exceptionError) throw new Error('deployment reverted');
  const at = created.createdAddress;

  async function call(from, signature, args = [], value = 0n) {
    const selector = artifact.method_identifiers[signature];
    if (!selector) throw new Error(`unknown function ${signature}`);
    const data = '0x' + selector + args.map(word).join('');
    const r = await evm.runCall({
      caller: accounts[from],
      to: at,
      data: hexToBytes(data),
      value,
      gasLimit: 1_000_000n,
    });
    const ok = !r.execResult.exceptionError;
    const ret = r.execResult.returnValue;
    return { ok, value: ok && ret.length >= 32 ? BigInt(bytesToHex(ret.slice(0, 32))) : undefined };
  }

  async function balance(who) {
    const a = who instanceof Address ? who : accounts[who];
    const acc = await evm.stateManager.getAccount(a);
    return acc ? acc.balance : 0n;
  }

  return { at, call, balance };
}

// Runs `body`; exits 0 when it returns true, 1 otherwise.
function run(body) {
  body()
    .then((ok) => process.exit(ok ? 0 : 1))
    .catch((e) => {
      console.error(e.message);
      process.exit(2);
    });
}

module.exports = { ETHER, accounts, deploy, run };
