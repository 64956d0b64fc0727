const { ETHER, accounts, deploy, run } = require('./harness');

run(async () => {
  const v = await deploy('Vault');
  const dep = await v.call('alice', 'deposit()', [], 5n * ETHER);
  const out = await v.call('alice', 'withdraw(uint256)', [2n * ETHER]);
  const left = await v.call('alice', 'balances(address)', [accounts.alice]);
  const sweep = await v.call('owner', 'sweep(address)', [accounts.owner]);
  const ok = dep.ok && out.ok && left.value === 3n * ETHER && sweep.ok && (await v.balance(v.at)) === 0n;
  if (!ok) console.error('vault tests failed', { dep, out, left, sweep });
  return ok;
});
